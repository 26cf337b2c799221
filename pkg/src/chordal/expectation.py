"""Expectation values: classical transport plus sheet-pair interference.

The classical term transports the curve's line density and integrates the
observable along it.  Each detected sheet pair beta adds a correction

    z_beta = exp(-i mu_loc pi / 2)
             int dx_par O(x_par) conj(a_-) a_+ exp(i S(x_par) / hbar) ,

entering the total as z + conj(z); the integrand varies only on the
classical scale, so an ordinary quadrature on a grid of a fraction of the
observable's length scale suffices.  Two closed-form limits (a quadratic
width bottleneck giving an Airy factor, and a constant-width pair giving
a Fourier component of the observable) and a brute-force two-dimensional
phase-space integral over the pair's chord field serve as cross-checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import airy

from .dynamics import flow, propagate_manifold
from .errors import ChordalError, NonConvergedError, NyquistError
from .geometry import wedge
from .manifold import Manifold1D
from .sheets import SheetPair, build_pair_geometry, detect_sheet_pairs

logger = logging.getLogger("chordal.expectation")

__all__ = [
    "expectation_classical", "TwaResult", "expectation_twa",
    "interference_quadrature", "interference_airy", "interference_fourier",
    "brute_force_interference", "ExpectationReport",
    "expectation_semiclassical",
]


def expectation_classical(m: Manifold1D, obs) -> float:
    """int ds |a(s)|^2 O(x(s)) along the curve."""
    vals = np.abs(m.amp) ** 2 * obs.on_points(m.points)
    return float(np.trapezoid(vals, m.s))


@dataclass
class TwaResult:
    mean: float
    stderr: float
    n_samples: int
    n_escaped: int = 0

    def __float__(self):
        return self.mean


def expectation_twa(m0: Manifold1D, sys, t, obs, n_samples, *,
                    rng=None, dt=None, escape_box=None) -> TwaResult:
    """Monte-Carlo transport of the curve's line density.

    Samples s proportionally to |a(s)|^2 ds, flows each point classically
    and averages the observable at the endpoints.
    """
    if n_samples < 1000:
        raise ValueError("use at least 1e3 samples")
    rng = rng if rng is not None else np.random.default_rng(0)
    dens = np.abs(m0.amp) ** 2
    cdf = np.concatenate([[0.0], np.cumsum(
        0.5 * (dens[1:] + dens[:-1]) * np.diff(m0.s))])
    total = cdf[-1]
    cdf /= total
    u = rng.random(n_samples)
    s_samp = np.interp(u, cdf, m0.s)
    x0 = m0.position(s_samp)
    n_esc = 0
    try:
        xt = flow(sys, x0, t, dt, escape_box)
    except ChordalError:
        # count and drop escapers rather than aborting the estimate
        xt = flow(sys, x0, t, dt, None)
        if escape_box is not None:
            p, q = xt[:, 0], xt[:, 1]
            bad = ((p < escape_box[0]) | (p > escape_box[1])
                   | (q < escape_box[2]) | (q > escape_box[3]))
            n_esc = int(np.count_nonzero(bad))
            xt = xt[~bad]
    vals = obs.on_points(xt) * total
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
    return TwaResult(mean, stderr, n_samples, n_esc)


def _pair_quadrature(pair: SheetPair, obs, hbar, step):
    x_lo, x_hi = pair.x_lo, pair.x_hi
    # dS/dx = w: for genuinely short chords the phase is slow on the
    # classical scale, but cap the step anyway so wide fixtures resolve
    step = min(step, 0.15 * hbar / max(float(np.max(pair.w)), 1e-300))
    n = max(int(np.ceil((x_hi - x_lo) / step)) + 1, 33)
    x = np.linspace(x_lo, x_hi, n)
    mid = pair.midpoint(x)
    vals = (obs.on_points(mid)
            * np.conj(pair.amp_minus(x)) * pair.amp_plus(x)
            * np.exp(1j * pair.action(x) / hbar))
    return complex(np.trapezoid(vals, x) * pair.index_phase())


def interference_quadrature(pair: SheetPair, obs, hbar, *,
                            step=None, rel_tol=1e-4) -> complex:
    """Pair contribution by direct quadrature along the midcurve.

    The grid step defaults to a thirty-second of the observable's length
    scale; a twofold refinement must agree to ``rel_tol`` relative or
    :class:`NonConvergedError` carries both estimates out.
    """
    if step is None:
        step = obs.length_scale / 32.0
    coarse = _pair_quadrature(pair, obs, hbar, step)
    fine = _pair_quadrature(pair, obs, hbar, step / 2.0)
    scale = max(abs(fine), 1e-300)
    rel = abs(fine - coarse) / scale
    if rel > rel_tol and abs(fine) > 1e-13:
        raise NonConvergedError(coarse, fine, rel, rel_tol)
    return fine


def interference_airy(pair: SheetPair, obs, hbar) -> complex:
    """Bottleneck limit: quadratic width minimum inside the pair.

    The cubic action about the minimum integrates to an Airy factor

        2 pi (2 hbar / w'')^(1/3) Ai[w0 (2 / (hbar^2 w''))^(1/3)] ,

    multiplying the slowly varying factors frozen at the minimum.
    """
    w_spl = pair._w_spl
    crit = w_spl.derivative().roots(extrapolate=False)
    crit = [x for x in crit
            if pair.x_lo < x < pair.x_hi and w_spl(x, 2) > 0]
    if len(crit) != 1:
        raise ChordalError(
            f"pair has {len(crit)} interior width minima; evaluate by "
            "quadrature instead")
    x0 = float(crit[0])
    w0 = float(pair.width(x0))
    wpp = float(pair.width(x0, 2))
    gamma = (2 * hbar / wpp) ** (1.0 / 3.0)
    arg = w0 * (2.0 / (hbar ** 2 * wpp)) ** (1.0 / 3.0)
    ai = airy(arg)[0]
    O0 = float(obs.on_points(pair.midpoint(x0)))
    amp = np.conj(pair.amp_minus(x0)) * pair.amp_plus(x0)
    phase = np.exp(1j * pair.action(x0) / hbar) * pair.index_phase()
    return complex(amp * O0 * phase * 2 * np.pi * gamma * ai)


def interference_fourier(pair: SheetPair, obs, hbar, *,
                         w_tol=0.02, step=None) -> complex:
    """Constant-width limit: the observable's transverse Fourier component.

    Valid when the width and the amplitudes are constant along the pair
    within ``w_tol`` relative; the action is then linear and the integral
    is the transform of O along the midcurve at frequency w / hbar.
    """
    w_mean = float(np.mean(pair.w))
    if np.ptp(pair.w) > w_tol * w_mean:
        raise ChordalError(
            f"width varies by {np.ptp(pair.w):.3g} over the pair; the "
            "constant-width form does not apply, use quadrature")
    amps = np.conj(pair.a_minus) * pair.a_plus
    if np.max(np.abs(amps - amps.mean())) > w_tol * max(np.mean(np.abs(amps)),
                                                        1e-300):
        raise ChordalError("amplitudes vary along the pair; use quadrature")
    if step is None:
        step = obs.length_scale / 32.0
    x0 = 0.5 * (pair.x_lo + pair.x_hi)
    n = max(int(np.ceil((pair.x_hi - pair.x_lo) / step)) + 1, 33)
    x = np.linspace(pair.x_lo, pair.x_hi, n)
    O_vals = obs.on_points(pair.midpoint(x))
    o_tilde = np.trapezoid(O_vals * np.exp(1j * w_mean * (x - x0) / hbar), x)
    return complex(amps.mean() * np.exp(1j * pair.action(x0) / hbar)
                   * pair.index_phase() * o_tilde)


# -- brute-force oracle --------------------------------------------------------


def _pair_chords_at(pair: SheetPair, x, warm=None, n_coarse=40):
    """All chords (s+, s-) between the two sheets with midpoint x."""
    mp, mm = pair.source.plus, pair.source.minus
    sp_lo, sp_hi = pair.s_plus.min(), pair.s_plus.max()
    sm_lo, sm_hi = pair.s_minus.min(), pair.s_minus.max()
    sols = []

    def polish(sp, sm):
        s = np.array([sp, sm])
        for _ in range(40):
            r = 0.5 * (mp.position(s[0]) + mm.position(s[1])) - x
            if np.hypot(*r) < 1e-12:
                break
            J = 0.5 * np.column_stack([mp.tangent(s[0]), mm.tangent(s[1])])
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            if abs(det) < 1e-14:
                return None
            s = s - np.linalg.solve(J, r)
            if not (sp_lo - 1e-9 <= s[0] <= sp_hi + 1e-9
                    and sm_lo - 1e-9 <= s[1] <= sm_hi + 1e-9):
                return None
        else:
            return None
        return float(s[0]), float(s[1])

    seeds = list(warm or [])
    si = np.linspace(sp_lo, sp_hi, n_coarse)
    sj = np.linspace(sm_lo, sm_hi, n_coarse)
    Pi = mp.position(si)
    Pj = mm.position(sj)
    rp = 0.5 * (Pi[:, None, 0] + Pj[None, :, 0]) - x[0]
    rq = 0.5 * (Pi[:, None, 1] + Pj[None, :, 1]) - x[1]

    def flips(r):
        s0 = np.sign(r)
        return ((s0[:-1, :-1] != s0[1:, :-1]) | (s0[:-1, :-1] != s0[:-1, 1:])
                | (s0[:-1, :-1] != s0[1:, 1:]))
    for a, b in np.argwhere(flips(rp) & flips(rq)):
        seeds.append((0.5 * (si[a] + si[a + 1]), 0.5 * (sj[b] + sj[b + 1])))

    tol_s = 1e-6 * max(sp_hi - sp_lo, sm_hi - sm_lo)
    for sp, sm in seeds:
        got = polish(sp, sm)
        if got is None:
            continue
        if any(abs(got[0] - c[0]) < tol_s and abs(got[1] - c[1]) < tol_s
               for c in sols):
            continue
        sols.append(got)
    return sols


def _vectorized_chord_solve(mp, mm, X, seed, bounds, tol):
    """Newton solve of the midpoint equations from one seed, all points."""
    sp_lo, sp_hi, sm_lo, sm_hi = bounds
    n = X.shape[0]
    sp = np.full(n, seed[0])
    sm = np.full(n, seed[1])
    alive = np.ones(n, dtype=bool)
    for _ in range(48):
        r = 0.5 * (mp.position(sp) + mm.position(sm)) - X
        res = np.hypot(r[:, 0], r[:, 1])
        active = alive & (res > tol)
        if not np.any(active):
            break
        tp = mp.tangent(sp[active])
        tm = mm.tangent(sm[active])
        # J = 0.5 [tp, tm]; solve J d = r with the explicit inverse
        det = 0.25 * (tp[:, 0] * tm[:, 1] - tp[:, 1] * tm[:, 0])
        bad = np.abs(det) < 1e-14
        ra = r[active]
        d_sp = 0.5 * (tm[:, 1] * ra[:, 0] - tm[:, 0] * ra[:, 1]) / det
        d_sm = 0.5 * (-tp[:, 1] * ra[:, 0] + tp[:, 0] * ra[:, 1]) / det
        d_sp[bad] = 0.0
        d_sm[bad] = 0.0
        idx = np.nonzero(active)[0]
        sp[idx] -= d_sp
        sm[idx] -= d_sm
        dead = idx[bad]
        alive[dead] = False
        out = ((sp < sp_lo - 1e-9) | (sp > sp_hi + 1e-9)
               | (sm < sm_lo - 1e-9) | (sm > sm_hi + 1e-9))
        alive &= ~out
    r = 0.5 * (mp.position(sp) + mm.position(sm)) - X
    good = alive & (np.hypot(r[:, 0], r[:, 1]) < tol) \
        & (sp >= sp_lo) & (sp <= sp_hi) & (sm >= sm_lo) & (sm <= sm_hi)
    return sp, sm, good


def brute_force_interference(pair: SheetPair, obs, hbar, *,
                             step=None, margin=3.0, d_floor=1e-4,
                             n_probe=11) -> complex:
    """Two-dimensional phase-space integral over the pair's chord field.

    Every chord joining the two sheets through each grid point contributes
    sqrt(2/(pi hbar)) conj(a-) a+ / sqrt|D| exp(i S/hbar + i nu pi/4) O(x);
    the quadrature must resolve the fastest oscillation, step less than
    hbar over four times the longest chord, or :class:`NyquistError` is
    raised.  Chord families are traced by vectorized Newton iteration from
    seeds found on a probe lattice; chords on a caustic of the chord field
    (|D| under ``d_floor`` relative) are skipped, their lines carrying
    vanishing measure in the grid limit.
    """
    mp, mm = pair.source.plus, pair.source.minus
    # integration box: the midcurve stretch inside the observable's
    # support, extended transversely past the local width
    probe = np.linspace(pair.x_lo, pair.x_hi, 512)
    mid_pts = pair.midpoint(probe)
    p_lo, p_hi, q_lo, q_hi = obs.support_box
    in_box = ((mid_pts[:, 0] >= p_lo) & (mid_pts[:, 0] <= p_hi)
              & (mid_pts[:, 1] >= q_lo) & (mid_pts[:, 1] <= q_hi))
    if not np.any(in_box):
        return 0.0 + 0.0j
    u_lo = float(probe[in_box][0])
    u_hi = float(probe[in_box][-1])
    u_probe = np.linspace(u_lo, u_hi, 128)
    w_box = float(np.max(pair.width(u_probe)))
    wp_box = np.abs(pair.width(u_probe, 1))
    fresnel_box = 0.5 * np.sqrt(hbar * np.maximum(wp_box, 1e-3))
    # per-column transverse reach: local width plus many oscillation
    # scales; a smooth window there lets the boundary terms cancel
    v_reach = 0.5 * pair.width(u_probe) + margin * np.sqrt(hbar) \
        + 10.0 * fresnel_box
    half_span = float(np.max(v_reach))
    xi_cap = max(3.0 * w_box,
                 float(np.max(4.0 * v_reach / np.maximum(wp_box, 0.1))),
                 8.0 * np.sqrt(hbar))
    step_max = hbar / (4.0 * xi_cap)
    if step is None:
        step = step_max
    if step > step_max * (1 + 1e-9):
        raise NyquistError(
            f"step {step:g} cannot resolve chords up to |xi| = {xi_cap:g}; "
            f"need step < {step_max:g}")

    k0 = len(pair.x_par) // 2
    e_par, e_perp = pair.e_par[k0], pair.e_perp[k0]
    theta = np.arctan2(e_par[0], e_par[1])
    u_ax = np.arange(u_lo, u_hi + step, step) - pair.x_lo
    v_ax = np.arange(-half_span, half_span + step, step)
    origin = pair.midpoint(pair.x_lo)
    X = (origin[None, :] + u_ax[:, None, None] * e_par[None, None, :]
         + v_ax[None, :, None] * e_perp[None, None, :]).reshape(-1, 2)
    # smooth transverse apodization: 1 inside 60% of the local reach,
    # a quintic ramp to 0 at the reach
    v_loc = np.interp(u_ax + pair.x_lo, u_probe, v_reach)
    uu_flat = np.repeat(u_ax, len(v_ax))
    vv_flat = np.tile(v_ax, len(u_ax))
    reach_flat = np.repeat(v_loc, len(v_ax))
    ramp = np.clip((reach_flat - np.abs(vv_flat)) / (0.4 * reach_flat), 0, 1)
    apod = ramp ** 3 * (10 - 15 * ramp + 6 * ramp ** 2)

    # seeds from full searches on a sparse probe lattice
    seeds = []
    for uu in np.linspace(u_ax[0], u_ax[-1], n_probe):
        for vv in np.linspace(v_ax[0], v_ax[-1], n_probe):
            xq = origin + uu * e_par + vv * e_perp
            for sol in _pair_chords_at(pair, xq):
                if not any(abs(sol[0] - s[0]) + abs(sol[1] - s[1]) < 1e-3
                           for s in seeds):
                    seeds.append(sol)
    if not seeds:
        return 0.0 + 0.0j

    bounds = (pair.s_plus.min(), pair.s_plus.max(),
              pair.s_minus.min(), pair.s_minus.max())
    scale_s = max(bounds[1] - bounds[0], bounds[3] - bounds[2])
    tol = 1e-10 * max(1.0, float(np.max(np.abs(pair.mid))))

    found = []  # (sp, sm, good) per seed, deduped pointwise
    for seed in seeds:
        sp, sm, good = _vectorized_chord_solve(mp, mm, X, seed, bounds, tol)
        # drop chords beyond the relevance cap
        xi_vec = mp.position(sp) - mm.position(sm)
        good &= np.hypot(xi_vec[:, 0], xi_vec[:, 1]) <= xi_cap
        for fp, fm, fg in found:
            dup = good & fg & (np.abs(sp - fp) < 1e-6 * scale_s) \
                & (np.abs(sm - fm) < 1e-6 * scale_s)
            good &= ~dup
        if np.any(good):
            found.append((sp, sm, good))

    t_scale = float(np.max(np.abs(mp.tangent(pair.s_plus)))
                    * np.max(np.abs(mm.tangent(pair.s_minus))))
    d_floor_abs = d_floor * t_scale
    O_vals = obs.on_points(X) * apod
    total = 0.0 + 0.0j
    n_skipped = 0
    for sp, sm, good in found:
        mask = good.copy()
        tp = mp.tangent(sp)
        tm = mm.tangent(sm)
        d_val = wedge(tp, tm)
        near_caustic = np.abs(d_val) < d_floor_abs
        n_skipped += int(np.count_nonzero(mask & near_caustic))
        mask &= ~near_caustic
        if not np.any(mask):
            continue
        mu = pair.source.mu_local(sm[mask][0], sp[mask][0], theta)
        gp = np.sin(theta) * tp[:, 0] + np.cos(theta) * tp[:, 1]
        gm = np.sin(theta) * tm[:, 0] + np.cos(theta) * tm[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            r_val = ((np.cos(theta) * tp[:, 0] - np.sin(theta) * tp[:, 1]) / gp
                     - (np.cos(theta) * tm[:, 0] - np.sin(theta) * tm[:, 1]) / gm)
        sigma = np.where(r_val > 0, 1.0, -1.0)
        xp = mp.position(sp)
        xm = mm.position(sm)
        S = (mp.action_at(sp) - mm.action_at(sm)
             - X[:, 0] * (xp[:, 1] - xm[:, 1]))
        amp = (np.conj(mm.amplitude(sm)) * mp.amplitude(sp)
               / np.sqrt(np.abs(d_val)))
        contrib = amp * np.exp(1j * (S / hbar + (sigma - 2 * mu) * np.pi / 4))
        total += np.sum(contrib[mask] * O_vals[mask])
    total *= np.sqrt(2.0 / (np.pi * hbar)) * step * step
    if n_skipped:
        logger.debug("brute force skipped %d near-caustic chord points",
                     n_skipped)
    return complex(total)


# -- assembly -------------------------------------------------------------------


@dataclass
class ExpectationReport:
    """Per-time expectation value decomposition."""

    t: float
    classical: float
    interference: list = field(default_factory=list)  # (pair_id, z, method)
    exact: float = None
    tsc_estimate: float = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def interference_sum(self) -> complex:
        return complex(sum(z for _, z, _ in self.interference))

    @property
    def total(self) -> float:
        return float(self.classical + 2.0 * self.interference_sum.real)

    def to_dict(self):
        return {
            "t": self.t,
            "classical": self.classical,
            "interference_terms": [
                {"pair_id": pid, "re": z.real, "im": z.imag, "method": meth}
                for pid, z, meth in self.interference],
            "interference_sum": {"re": self.interference_sum.real,
                                 "im": self.interference_sum.imag},
            "total": self.total,
            "exact": self.exact,
            "tsc_estimate": self.tsc_estimate,
            "diagnostics": self.diagnostics,
        }


def expectation_semiclassical(m0: Manifold1D, sys, t, obs, hbar, *,
                              method="auto", thresholds=None,
                              exact_state=None, exact_sys_dt=None,
                              max_spacing=None, dt=None) -> ExpectationReport:
    """Propagate, detect pairs, and assemble classical + interference.

    ``method`` picks the pair evaluator: "quadrature" (default inside
    "auto"), "airy", or "fourier"; "auto" falls back across them and
    attaches limit-form cross-checks when their preconditions hold.
    An exact reference is attached when ``exact_state`` (the t = 0 grid
    state) is supplied.
    """
    thresholds = dict(thresholds or {})
    c_thresh = thresholds.get("c_short_chord", 3.0)
    merge_floor = thresholds.get("pair_merge_floor_s")
    angle_max = thresholds.get("tangent_angle_max", 0.35)

    mt = propagate_manifold(m0, sys, t, dt=dt, max_spacing=max_spacing)
    classical = expectation_classical(mt, obs)

    report = ExpectationReport(t=float(t), classical=classical)
    sources = detect_sheet_pairs(mt, obs, hbar, c_thresh=c_thresh,
                                 s_merge_floor=merge_floor)
    pair_diags = []
    for src in sources:
        pair = build_pair_geometry(src, hbar, tangent_angle_max=angle_max)
        z, used = _evaluate_pair(pair, obs, hbar, method)
        report.interference.append((src.pair_id, z, used))
        pd = dict(pair.diagnostics)
        pd["pair_id"] = src.pair_id
        pd["mu_local"] = pair.mu_local
        pd["method"] = used
        pd.update(_limit_cross_checks(pair, obs, hbar, z, method))
        pair_diags.append(pd)
    report.diagnostics["pairs"] = pair_diags

    if exact_state is not None:
        from .quantum import expectation_exact, propagate_exact
        st = propagate_exact(exact_state, sys, t, dt=exact_sys_dt or dt)
        report.exact = float(expectation_exact(st, obs))
    return report


def _evaluate_pair(pair, obs, hbar, method):
    if method == "airy":
        return interference_airy(pair, obs, hbar), "airy"
    if method == "fourier":
        return interference_fourier(pair, obs, hbar), "fourier"
    if method in ("quadrature", "auto"):
        return interference_quadrature(pair, obs, hbar), "quadrature"
    raise ValueError(f"unknown method {method!r}")


def _limit_cross_checks(pair, obs, hbar, z_ref, method):
    """Attach limit-form values when their preconditions hold (auto only)."""
    out = {}
    if method != "auto":
        return out
    scale = max(abs(z_ref), 1e-300)
    try:
        z_airy = interference_airy(pair, obs, hbar)
        out["airy_rel_diff"] = abs(z_airy - z_ref) / scale
    except ChordalError:
        pass
    try:
        z_fourier = interference_fourier(pair, obs, hbar)
        out["fourier_rel_diff"] = abs(z_fourier - z_ref) / scale
    except ChordalError:
        pass
    return out
