"""Nearly coincident sheet pairs of a folded curve.

After enough stretching, distinct stretches of the evolved curve pass
within a quantum-scale distance of each other inside the observable's
window.  Each such pair is reduced to a common geometry:

* a midcurve halfway between the sheets, parametrized by its arc length
  x_par, with an orthonormal frame (e_par, e_perp), wedge(e_par, e_perp)
  = -1, oriented so the chord points from the minus sheet to the plus
  sheet with positive transverse component;
* the width w(x_par) = chord length in the canonical transverse measure;
* transported amplitudes a±(x_par) = a(s±) sqrt|ds±/dx_par|;
* the chord action S(x_par), whose derivative along the midcurve equals
  the width (dS/dx_par = w);
* index bookkeeping.  In the pair's own frame the slope-difference sign
  and the transverse-integration sign cancel identically, leaving only
  the local-frame caustic count mu_local of the connecting path, so each
  pair contributes with the constant phase exp(-i mu_local pi/2).  The
  frame-dependent raw indices are kept as diagnostics.

Pairs are detected on the sampled curve by a neighbor search restricted
to the observable's support box and completed into this geometry here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .chords import _maslov_between_rotated
from .errors import ChordalError, MultiSheetClusterError
from .manifold import Manifold1D, maslov_between

logger = logging.getLogger("chordal.sheets")

__all__ = ["SheetPair", "detect_sheet_pairs", "build_pair_geometry",
           "synthetic_pair"]


class PairSource:
    """Two sheet curves plus the index bookkeeping connecting them."""

    def __init__(self, plus: Manifold1D, minus: Manifold1D,
                 seg_plus, seg_minus, *, parent=None, mu_pair=0,
                 pair_id=0):
        self.plus = plus
        self.minus = minus
        self.seg_plus = tuple(seg_plus)
        self.seg_minus = tuple(seg_minus)
        self.parent = parent  # manifold both sheets belong to, if any
        self.mu_pair = mu_pair  # relative index of disjoint branches
        self.pair_id = pair_id

    def mu_local(self, s_minus, s_plus, theta):
        """Caustic count of the connecting path in the frame theta."""
        if self.parent is not None:
            mu = _maslov_between_rotated(self.parent, s_minus, s_plus, theta)
            if mu is None:
                raise ChordalError(
                    "local-frame caustic too close to a pair endpoint")
            return int(mu)
        # disjoint graph-like branches carry no local caustics; their
        # relative index is part of the pair data
        return int(self.mu_pair)

    def mu_global(self, s_minus, s_plus):
        if self.parent is not None:
            return int(maslov_between(self.parent, s_minus, s_plus))
        return int(self.mu_pair)


@dataclass
class SheetPair:
    """Completed pair geometry sampled along the midcurve."""

    source: PairSource
    x_par: np.ndarray
    mid: np.ndarray            # (M, 2) midcurve points
    e_par: np.ndarray          # (M, 2) unit tangent frame
    e_perp: np.ndarray         # (M, 2), wedge(e_par, e_perp) = -1
    w: np.ndarray              # transverse width, > 0
    s_plus: np.ndarray
    s_minus: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray
    S_mid: np.ndarray
    mu_local: int
    mu: int
    eta: int
    eta_perp: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def pair_id(self):
        return self.source.pair_id

    def __post_init__(self):
        self._w_spl = CubicSpline(self.x_par, self.w)
        self._S_spl = CubicSpline(self.x_par, self.S_mid)
        self._ap_re = CubicSpline(self.x_par, self.a_plus.real)
        self._ap_im = CubicSpline(self.x_par, self.a_plus.imag)
        self._am_re = CubicSpline(self.x_par, self.a_minus.real)
        self._am_im = CubicSpline(self.x_par, self.a_minus.imag)
        self._mid_p = CubicSpline(self.x_par, self.mid[:, 0])
        self._mid_q = CubicSpline(self.x_par, self.mid[:, 1])
        self._sp_spl = CubicSpline(self.x_par, self.s_plus)
        self._sm_spl = CubicSpline(self.x_par, self.s_minus)

    # smooth accessors along the midcurve
    def width(self, x, order=0):
        return self._w_spl(x, order)

    def action(self, x, order=0):
        return self._S_spl(x, order)

    def amp_plus(self, x):
        return self._ap_re(x) + 1j * self._ap_im(x)

    def amp_minus(self, x):
        return self._am_re(x) + 1j * self._am_im(x)

    def midpoint(self, x):
        return np.stack([self._mid_p(x), self._mid_q(x)], axis=-1)

    @property
    def x_lo(self):
        return float(self.x_par[0])

    @property
    def x_hi(self):
        return float(self.x_par[-1])

    def index_phase(self):
        """exp(-i mu_local pi / 2), the pair's constant index factor."""
        return np.exp(-0.5j * np.pi * self.mu_local)


def _cylinder_embedding(points, q_period):
    """Embed (p, q) in R^3 so distances respect the cylinder metric."""
    if q_period is None:
        return points
    R = q_period / (2 * np.pi)
    return np.column_stack([
        points[:, 0],
        R * np.cos(points[:, 1] / R),
        R * np.sin(points[:, 1] / R),
    ])


def _in_support(points, box, pad, q_period=None):
    p, q = points[:, 0], points[:, 1]
    p_lo, p_hi, q_lo, q_hi = box
    ok_p = (p >= p_lo - pad) & (p <= p_hi + pad)
    if q_period is None:
        ok_q = (q >= q_lo - pad) & (q <= q_hi + pad)
    else:
        q_c = 0.5 * (q_lo + q_hi)
        half = 0.5 * (q_hi - q_lo) + pad
        dq = np.abs((q - q_c + q_period / 2) % q_period - q_period / 2)
        ok_q = dq <= half
    return ok_p & ok_q


def detect_sheet_pairs(m: Manifold1D, obs, hbar, *, c_thresh=3.0,
                       arc_ratio_floor=2.0, s_merge_floor=None, pad=None):
    """Find parameter-disjoint curve segments closer than the chord scale.

    A link between two samples counts as a cross-sheet chord only when
    the arc length between them exceeds ``arc_ratio_floor`` times their
    spatial separation (same-sheet neighbours have ratio close to one;
    points joined through a fold have a markedly longer arc).  Returns
    raw :class:`PairSource` objects ordered so the earlier parameter
    interval is the minus sheet.  Three or more mutually close sheets
    raise :class:`MultiSheetClusterError`.
    """
    w_thresh = c_thresh * np.sqrt(hbar * obs.length_scale)
    if pad is None:
        pad = 0.5 * obs.length_scale + w_thresh

    inside = _in_support(m.points, obs.support_box, pad, m.q_period)
    if not np.any(inside):
        return []
    emb = _cylinder_embedding(m.points, m.q_period)
    tree = cKDTree(emb)
    pairs = tree.query_pairs(w_thresh, output_type="ndarray")
    if len(pairs) == 0:
        return []
    i, j = pairs[:, 0], pairs[:, 1]
    # cumulative arc length along the curve
    seg = np.hypot(*np.diff(m.points, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    d_arc = np.abs(arc[j] - arc[i])
    if m.closed:
        d_arc = np.minimum(d_arc, arc[-1] - d_arc)
    dist = np.hypot(*(emb[j] - emb[i]).T) if emb.shape[1] == 2 else \
        np.linalg.norm(emb[j] - emb[i], axis=1)
    keep = (inside[i] | inside[j]) & (d_arc > arc_ratio_floor
                                      * np.maximum(dist, 1e-300))
    if s_merge_floor is not None:
        keep &= np.abs(m.s[j] - m.s[i]) > s_merge_floor
    else:
        s_merge_floor = max(20 * np.median(np.diff(m.s)), 0.002 * m.length)
    links = pairs[keep]
    if len(links) == 0:
        return []

    # each sample's partners must form a single arc cluster, otherwise
    # three or more sheets are mutually close
    partner_gap = max(3.0 * w_thresh, 10 * np.median(seg))
    by_sample = {}
    for a, b in links:
        by_sample.setdefault(int(a), []).append(arc[b])
        by_sample.setdefault(int(b), []).append(arc[a])
    for k, partner_arcs in by_sample.items():
        pa = np.sort(np.asarray(partner_arcs))
        if len(pa) > 1 and np.max(np.diff(pa)) > partner_gap:
            raise MultiSheetClusterError(
                f"sample at s = {m.s[k]:g} is close to two distinct sheets; "
                "pairwise geometry does not apply")

    # participants fall into contiguous arc intervals (the sheets); a
    # sheet boundary is an arc gap or a flip of the partner side (the
    # partner-offset sign reverses exactly at a fold tip)
    part = np.unique(links)
    group_gap = 5 * np.median(seg)
    offset = np.array([np.mean(by_sample[int(k)]) - arc[int(k)]
                       for k in part])
    cut = np.nonzero((np.diff(arc[part]) > group_gap)
                     | (np.sign(offset[:-1]) != np.sign(offset[1:])))[0]
    groups = np.split(part, cut + 1)
    group_of = {}
    for g, members in enumerate(groups):
        for k in members:
            group_of[int(k)] = g

    pair_members = {}
    group_partners = [set() for _ in groups]
    for a, b in links:
        ga, gb = group_of[int(a)], group_of[int(b)]
        if ga == gb:
            continue
        group_partners[ga].add(gb)
        group_partners[gb].add(ga)
        d = pair_members.setdefault((min(ga, gb), max(ga, gb)), {})
        d.setdefault(ga, []).append(int(a))
        d.setdefault(gb, []).append(int(b))
    for g, partners in enumerate(group_partners):
        if len(partners) > 1:
            raise MultiSheetClusterError(
                f"curve segment near s = {m.s[groups[g][0]]:g} pairs with "
                f"{len(partners)} other sheets; pairwise geometry does not "
                "apply")

    out = []
    for pid, ((ga, gb), members) in enumerate(sorted(pair_members.items())):
        sa = m.s[members[ga]]
        sb = m.s[members[gb]]
        seg_a = (float(sa.min()), float(sa.max()))
        seg_b = (float(sb.min()), float(sb.max()))
        if seg_a[0] > seg_b[0]:
            seg_a, seg_b = seg_b, seg_a
        out.append(PairSource(m, m, seg_plus=seg_b, seg_minus=seg_a,
                              parent=m, pair_id=pid))
    return out


def _nearest_on_curve(m, s_grid, pts_query, s_lo, s_hi):
    """Perpendicular feet on the curve piece for each query point."""
    pts = m.position(s_grid)
    tree = cKDTree(pts)
    _, nearest = tree.query(pts_query)
    s_best = s_grid[nearest]
    # Newton refinement of d/ds |x(s) - y|^2 = 0
    for _ in range(30):
        x = m.position(s_best)
        t = m.tangent(s_best)
        t2 = m.second_derivative(s_best)
        diff = x - pts_query
        g = np.sum(diff * t, axis=-1)
        h = np.sum(t * t, axis=-1) + np.sum(diff * t2, axis=-1)
        step = np.where(np.abs(h) > 1e-300, g / h, 0.0)
        s_new = np.clip(s_best - step, s_lo, s_hi)
        if np.max(np.abs(s_new - s_best)) < 1e-13 * max(1.0, s_hi - s_lo):
            s_best = s_new
            break
        s_best = s_new
    return s_best


def build_pair_geometry(source: PairSource, hbar, *, n_nodes=None,
                        tangent_angle_max=0.35) -> SheetPair:
    """Complete a raw pair into midcurve coordinates.

    Minus-sheet nodes are matched to their perpendicular feet on the plus
    sheet; midpoints of matched endpoints form the midcurve.  Sheets whose
    tangents disagree by more than ``tangent_angle_max`` radians anywhere
    are outside the nearly parallel regime and are rejected.
    """
    mp, mm = source.plus, source.minus
    sp_lo, sp_hi = source.seg_plus
    sm_lo, sm_hi = source.seg_minus
    if n_nodes is None:
        n_nodes = 256
    s_m = np.linspace(sm_lo, sm_hi, n_nodes)
    x_m = mm.position(s_m)
    s_grid_p = np.linspace(sp_lo, sp_hi, 8 * n_nodes)
    s_p = _nearest_on_curve(mp, s_grid_p, x_m, sp_lo, sp_hi)
    x_p = mp.position(s_p)

    # drop minus nodes whose foot saturates at a segment end
    interior = (s_p > sp_lo + 1e-9 * (sp_hi - sp_lo)) & \
               (s_p < sp_hi - 1e-9 * (sp_hi - sp_lo))
    if np.count_nonzero(interior) < 8:
        raise ChordalError("pair segments share too little transverse overlap")
    s_m, s_p = s_m[interior], s_p[interior]
    x_m, x_p = x_m[interior], x_p[interior]

    t_p = mp.tangent(s_p)
    t_m = mm.tangent(s_m)
    ang_p = np.arctan2(t_p[:, 1], t_p[:, 0])
    ang_m = np.arctan2(t_m[:, 1], t_m[:, 0])
    d_ang = np.abs((ang_p - ang_m + np.pi / 2) % np.pi - np.pi / 2)
    trimmed_frac = 0.0
    if np.max(d_ang) > tangent_angle_max:
        # keep the longest contiguous nearly parallel stretch; a fold tip
        # or segment edge outside the bound is simply outside the pair
        ok = d_ang <= tangent_angle_max
        runs = np.split(np.arange(len(ok)), np.nonzero(np.diff(ok))[0] + 1)
        runs = [r for r in runs if ok[r[0]]]
        best = max(runs, key=len) if runs else []
        if len(best) < 8:
            raise ChordalError(
                f"sheet tangents differ by up to {np.max(d_ang):.3f} rad, "
                f"beyond the nearly parallel bound {tangent_angle_max:g}")
        trimmed_frac = 1.0 - len(best) / len(ok)
        logger.debug("pair %d: trimmed %.0f%% of nodes outside the "
                     "tangent-angle bound", source.pair_id,
                     100 * trimmed_frac)
        sel = np.asarray(best)
        s_m, s_p = s_m[sel], s_p[sel]
        x_m, x_p = x_m[sel], x_p[sel]
        t_p, t_m = t_p[sel], t_m[sel]
        d_ang = d_ang[sel]

    mid = 0.5 * (x_p + x_m)
    xi = x_p - x_m

    # arc length along the midcurve
    seglen = np.hypot(*np.diff(mid, axis=0).T)
    x_par = np.concatenate([[0.0], np.cumsum(seglen)])
    # unit tangent frame, smoothed through a spline of the midcurve
    mid_p_spl = CubicSpline(x_par, mid[:, 0])
    mid_q_spl = CubicSpline(x_par, mid[:, 1])
    u = np.column_stack([mid_p_spl(x_par, 1), mid_q_spl(x_par, 1)])
    u /= np.hypot(u[:, 0], u[:, 1])[:, None]
    e_perp = np.column_stack([u[:, 1], -u[:, 0]])  # wedge(u, e_perp) = -1

    w_signed = np.sum(xi * e_perp, axis=-1)
    if np.mean(np.sign(w_signed)) < 0:
        # flip the parallel orientation so the chord points along +e_perp
        order = slice(None, None, -1)
        s_m, s_p = s_m[order], s_p[order]
        x_m, x_p = x_m[order], x_p[order]
        mid, xi = mid[order], xi[order]
        x_par = x_par[-1] - x_par[order]
        u = -u[order]
        e_perp = -e_perp[order]
        w_signed = w_signed[order] * -1.0
    if np.any(w_signed <= 0):
        raise ChordalError("sheets cross inside the pair window")
    xi_par = np.sum(xi * u, axis=-1)
    xi_par_rel = float(np.max(np.abs(xi_par) / np.maximum(w_signed, 1e-300)))
    if xi_par_rel > 0.2:
        logger.warning("pair %d: chord parallel component up to %.2f of "
                       "the width", source.pair_id, xi_par_rel)

    # transported amplitudes and the chord action
    dsp = CubicSpline(x_par, s_p)(x_par, 1)
    dsm = CubicSpline(x_par, s_m)(x_par, 1)
    a_p = mp.amplitude(s_p) * np.sqrt(np.abs(dsp))
    a_m = mm.amplitude(s_m) * np.sqrt(np.abs(dsm))
    S_mid = (mp.action_at(s_p) - mm.action_at(s_m)
             - mid[:, 0] * (x_p[:, 1] - x_m[:, 1]))

    # index bookkeeping at a representative interior node
    k0 = len(x_par) // 2
    theta = np.arctan2(u[k0, 0], u[k0, 1])
    mu_loc = source.mu_local(s_m[k0], s_p[k0], theta)
    mu_glob = source.mu_global(s_m[k0], s_p[k0])
    w_spl = CubicSpline(x_par, w_signed)
    wp0 = float(w_spl(x_par[k0], 1))
    eta_perp = int(np.sign(wp0)) if abs(wp0) > 1e-10 else 0
    slope_p = t_p[k0]
    slope_m = t_m[k0]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_val = slope_p[0] / slope_p[1] - slope_m[0] / slope_m[1]
    eta = 1 if r_val < 0 else 0

    # paper-form constant phase vs the local-frame one, as a diagnostic
    variant_literal = (-0.5 * np.pi * mu_glob + 0.25 * np.pi * (1 - 2 * eta)
                       + 0.25 * np.pi * eta_perp)
    variant_local = -0.5 * np.pi * mu_loc
    mismatch = (variant_literal - variant_local) % (2 * np.pi)
    mismatch = min(mismatch, 2 * np.pi - mismatch)

    diags = {
        "tangent_angle_max": float(np.max(d_ang)),
        "trimmed_fraction": trimmed_frac,
        "xi_parallel_over_w": xi_par_rel,
        "phase_variant_mismatch": float(mismatch),
        "w_min": float(np.min(w_signed)),
        "w_max": float(np.max(w_signed)),
    }
    if mismatch > 1e-6:
        logger.debug("pair %d: raw-index phase differs from local-frame "
                     "phase by %.3f rad", source.pair_id, mismatch)

    return SheetPair(
        source=source, x_par=x_par, mid=mid, e_par=u, e_perp=e_perp,
        w=w_signed, s_plus=s_p, s_minus=s_m, a_plus=a_p, a_minus=a_m,
        S_mid=S_mid, mu_local=mu_loc, mu=mu_glob, eta=eta,
        eta_perp=eta_perp, diagnostics=diags)


def synthetic_pair(w_of_x, x_range, *, a_plus=None, a_minus=None,
                   mu=0, n=512, hbar=None, action_offset=0.0):
    """Fixture pair: straight midcurve along the q axis, sheets p = ±w/2.

    The pair fields are written down directly in the idealized frame
    (x_par is the q coordinate, the width is ``w_of_x`` itself, the action
    its integral), bypassing the endpoint-matching machinery; the two
    branch manifolds are attached so the brute-force integral can solve
    the genuine chord equations on them.  ``mu`` is the relative index of
    the branches; ``action_offset`` adds a constant relative phase.
    """
    from scipy.integrate import cumulative_trapezoid

    x = np.linspace(x_range[0], x_range[1], n)
    w = np.asarray(w_of_x(x), dtype=float) * np.ones_like(x)
    if np.any(w <= 0):
        raise ValueError("the width must stay positive on the fixture range")
    ap = np.ones_like(x, dtype=complex) if a_plus is None else \
        np.asarray(a_plus(x), dtype=complex) * np.ones_like(x)
    am = np.ones_like(x, dtype=complex) if a_minus is None else \
        np.asarray(a_minus(x), dtype=complex) * np.ones_like(x)

    plus = Manifold1D(x, np.column_stack([+0.5 * w, x]), ap)
    minus = Manifold1D(x, np.column_stack([-0.5 * w, x]), am)
    source = PairSource(plus, minus, seg_plus=(x[0], x[-1]),
                        seg_minus=(x[0], x[-1]), parent=None, mu_pair=mu)

    mid = np.column_stack([np.zeros_like(x), x])
    e_par = np.tile([0.0, 1.0], (n, 1))
    e_perp = np.tile([1.0, 0.0], (n, 1))  # wedge(e_par, e_perp) = -1
    S_mid = np.concatenate([[0.0], cumulative_trapezoid(w, x)]) + action_offset
    wp0 = np.gradient(w, x)[n // 2]
    return SheetPair(
        source=source, x_par=x, mid=mid, e_par=e_par, e_perp=e_perp,
        w=w, s_plus=x.copy(), s_minus=x.copy(), a_plus=ap, a_minus=am,
        S_mid=S_mid, mu_local=mu, mu=mu,
        eta=1 if wp0 < 0 else 0,
        eta_perp=int(np.sign(wp0)) if abs(wp0) > 1e-12 else 0,
        diagnostics={"synthetic": True})
