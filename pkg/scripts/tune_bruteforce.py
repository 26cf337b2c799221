"""Parameter sweep: brute-force oracle vs midcurve quadrature.

Run from the repo root; prints one line per configuration.  Used to pick
the shipped fixture parameters for the oracle-equivalence criterion.
"""
import time

import numpy as np

from chordal.expectation import brute_force_interference, interference_quadrature
from chordal.observables import Observable
from chordal.sheets import synthetic_pair


def gauss_q(sigma, center):
    return Observable(
        "gq", lambda p, q: np.exp(-(q - center) ** 2 / (2 * sigma ** 2)) + 0 * p,
        sigma, (-60, 60, center - 5 * sigma, center + 5 * sigma))


def run(tag, w0, wpp, x_half, n, hb, sigma, center, **kw):
    pair = synthetic_pair(lambda x: w0 + 0.5 * wpp * x ** 2, (-x_half, x_half), n=n)
    obs = gauss_q(sigma, center)
    z_q = interference_quadrature(pair, obs, hb)
    t0 = time.time()
    try:
        z_b = brute_force_interference(pair, obs, hb, **kw)
    except Exception as e:
        print(f"{tag}: FAILED {type(e).__name__}: {e}", flush=True)
        return
    rel = abs(z_b - z_q) / abs(z_q)
    print(f"{tag}: rel={rel:.2e} |z|={abs(z_q):.4f} t={time.time()-t0:.0f}s",
          flush=True)


if __name__ == "__main__":
    # off-minimum windows (locally tilted, single family)
    run("tilt hb=.1 c=1.0", 0.2, 0.8, 8.0, 4001, 0.10, 0.12, 1.0)
    run("tilt hb=.1 c=1.2", 0.2, 0.8, 8.0, 4001, 0.10, 0.12, 1.2)
    run("tilt hb=.15 c=1.2", 0.25, 0.8, 8.0, 4001, 0.15, 0.15, 1.2)
    # bottleneck windows (over the minimum)
    run("neck hb=.1 w0~arg1", 0.2, 2.0, 8.0, 4001, 0.10, 0.5, 0.0)
    run("neck hb=.15 w0~arg1", 0.25, 2.0, 8.0, 4001, 0.15, 0.5, 0.0)
