import numpy as np
import pytest
from scipy.special import airy

from chordal.errors import ChordalError, NonConvergedError, NyquistError
from chordal.expectation import (brute_force_interference, interference_airy,
                                 interference_fourier,
                                 interference_quadrature)
from chordal.observables import Observable, gaussian_observable
from chordal.sheets import synthetic_pair

HBAR = 0.1


def gaussian_q_observable(sigma=1.0, center=0.0, amplitude=1.0):
    return Observable(
        "gauss-q",
        lambda p, q: amplitude * np.exp(-(q - center) ** 2 / (2 * sigma ** 2))
        + 0.0 * p,
        sigma, (-50.0, 50.0, center - 6 * sigma, center + 6 * sigma))


def test_quadrature_zero_observable():
    pair = synthetic_pair(lambda x: 0.4 + 0 * x, (-3.0, 3.0))
    obs = Observable("null", lambda p, q: 0.0 * q, 1.0, (-1, 1, -1, 1))
    assert interference_quadrature(pair, obs, HBAR) == 0


def test_quadrature_parallel_lines_gaussian_closed_form():
    # |integral| = sqrt(2 pi) exp(-w^2 / (2 hbar^2)) for unit amplitudes
    for w in (0.12, 0.2, 0.3):
        pair = synthetic_pair(lambda x: w + 0 * x, (-8.0, 8.0), n=1201)
        obs = gaussian_q_observable()
        z = interference_quadrature(pair, obs, HBAR)
        expect = np.sqrt(2 * np.pi) * np.exp(-w ** 2 / (2 * HBAR ** 2))
        assert abs(z) == pytest.approx(expect, rel=1e-6)


def test_quadrature_matches_exact_two_branch_state():
    """Independent oracle: the pair is a momentum cat state on a grid."""
    from chordal.quantum import GridSpec, GridState, expectation_exact
    w, sig = 0.25, 1.3
    hbar = 0.08
    env_sigma = 4.0
    spec = GridSpec(-30.0, 30.0, 4096, hbar)
    q = spec.q
    env = np.exp(-q ** 2 / (2 * env_sigma ** 2))
    # branch phases share the pair's action reference (zero at q = -25)
    psi = env * (np.exp(1j * 0.5 * w * (q + 25.0) / hbar)
                 + np.exp(-1j * 0.5 * w * (q + 25.0) / hbar))
    st = GridState(psi, spec.q_min, spec.dq, hbar).normalized()
    norm2 = np.sum(np.abs(env) ** 2) * spec.dq * 2  # branch normalization
    obs = gaussian_q_observable(sigma=sig)
    exact = expectation_exact(st, obs)

    # classical part: both branches carry |env|^2 / norm2 each
    classical = 2 * np.trapezoid(env ** 2 / norm2
                                 * obs(0 * q, q), q)
    pair = synthetic_pair(lambda x: w + 0 * x, (-25.0, 25.0), n=4001,
                          a_plus=lambda x: np.exp(-x ** 2 / (2 * env_sigma ** 2))
                          / np.sqrt(norm2),
                          a_minus=lambda x: np.exp(-x ** 2 / (2 * env_sigma ** 2))
                          / np.sqrt(norm2))
    z = interference_quadrature(pair, obs, hbar)
    total = classical + 2 * z.real
    assert total == pytest.approx(exact, abs=2e-4 * abs(exact))


def test_fourier_limit_matches_quadrature():
    pair = synthetic_pair(lambda x: 0.22 + 0 * x, (-9.0, 9.0), n=1401)
    obs = gaussian_q_observable(sigma=1.1, center=0.3)
    z_q = interference_quadrature(pair, obs, HBAR)
    z_f = interference_fourier(pair, obs, HBAR)
    assert abs(z_f - z_q) < 1e-3 * abs(z_q)


def test_fourier_limit_rejects_varying_width():
    pair = synthetic_pair(lambda x: 0.3 + 0.05 * x, (-2.0, 2.0))
    obs = gaussian_q_observable()
    with pytest.raises(ChordalError, match="quadrature"):
        interference_fourier(pair, obs, HBAR)


def test_fourier_zero_frequency_limit():
    # w / hbar -> 0 gives the plain integral of O along the pair
    pair = synthetic_pair(lambda x: 1e-6 + 0 * x, (-8.0, 8.0))
    obs = gaussian_q_observable()
    z = interference_fourier(pair, obs, HBAR)
    assert z.real == pytest.approx(np.sqrt(2 * np.pi), rel=1e-4)
    # compact support away from the pair gives zero
    far = gaussian_q_observable(center=30.0)
    far = Observable(far.name, far.symbol, far.length_scale,
                     (-50, 50, 24.0, 36.0))
    assert abs(interference_quadrature(
        synthetic_pair(lambda x: 0.2 + 0 * x, (-8.0, 8.0)), far, HBAR)) < 1e-12


def test_airy_touching_sheets_value():
    # w0 = 0: the Airy factor is 2 pi (2 hbar / w'')^(1/3) Ai(0)
    wpp = 2.0
    pair = synthetic_pair(lambda x: 1e-12 + 0.5 * wpp * x ** 2, (-3.0, 3.0),
                          n=1201)
    obs = Observable("one", lambda p, q: 1.0 + 0 * q, 10.0,
                     (-50, 50, -50, 50))
    z = interference_airy(pair, obs, HBAR)
    gamma = (2 * HBAR / wpp) ** (1 / 3)
    # the pair's action reference sits at its left edge
    expect = (2 * np.pi * gamma * airy(0.0)[0]
              * np.exp(1j * pair.action(0.0) / HBAR))
    assert z == pytest.approx(expect, rel=1e-6)
    assert airy(0.0)[0] == pytest.approx(0.35503, abs=1e-5)


def test_airy_matches_quadrature_in_window():
    # quadratic bottleneck, |argument| <= 2
    wpp = 2.0
    obs = gaussian_q_observable(sigma=4.0)
    for hb in (0.05, 0.1):
        for arg in (0.0, 0.5, 1.0, 1.5, 2.0):
            w0 = max(arg / (2.0 / (hb ** 2 * wpp)) ** (1 / 3), 1e-12)
            pair = synthetic_pair(lambda x: w0 + 0.5 * wpp * x ** 2,
                                  (-4.0, 4.0), n=1601)
            z_q = interference_quadrature(pair, obs, hb)
            z_a = interference_airy(pair, obs, hb)
            assert abs(z_a - z_q) < 1e-2 * abs(z_q), (hb, arg)


def test_airy_exponentially_small_tail():
    wpp = 2.0
    hb = 0.1
    arg = 4.0
    w0 = arg / (2.0 / (hb ** 2 * wpp)) ** (1 / 3)
    obs = gaussian_q_observable(sigma=4.0)
    pair = synthetic_pair(lambda x: w0 + 0.5 * wpp * x ** 2, (-4.0, 4.0),
                          n=1601)
    z_q = interference_quadrature(pair, obs, hb)
    z_a = interference_airy(pair, obs, hb)
    assert abs(z_a) < 0.05 * np.sqrt(2 * np.pi)  # deep tail
    assert abs(z_a - z_q) < 0.05 * abs(z_q)


def test_airy_requires_interior_minimum():
    pair = synthetic_pair(lambda x: 0.3 + 0.1 * x, (-2.0, 2.0))
    obs = gaussian_q_observable()
    with pytest.raises(ChordalError, match="quadrature"):
        interference_airy(pair, obs, HBAR)


def test_brute_force_zero_observable():
    pair = synthetic_pair(lambda x: 0.3 + 0.02 * x, (-1.0, 1.0))
    obs = Observable("null", lambda p, q: 0.0 * q, 1.0, (-1, 1, -1, 1))
    assert brute_force_interference(pair, obs, HBAR) == 0


def test_brute_force_matches_quadrature_tilted_lines():
    # gently tilted pair: one transverse chord family everywhere
    hb = 0.1
    pair = synthetic_pair(lambda x: 0.3 + 0.1 * x, (-1.6, 1.6), n=1201)
    obs = gaussian_q_observable(sigma=0.5)
    z_q = interference_quadrature(pair, obs, hb)
    z_b = brute_force_interference(pair, obs, hb)
    assert abs(z_b - z_q) < 1e-3 * abs(z_q)


def test_brute_force_nyquist_guard():
    pair = synthetic_pair(lambda x: 0.3 + 0.1 * x, (-1.6, 1.6))
    obs = gaussian_q_observable()
    with pytest.raises(NyquistError):
        brute_force_interference(pair, obs, HBAR, step=1.0)
