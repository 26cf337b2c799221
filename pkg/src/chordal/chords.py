"""Chord geometry on a sampled Lagrangian curve.

A chord through a phase-space center x is a pair of curve points
x(s+), x(s-) whose midpoint is x.  Each chord carries

* an action: the symplectic area between the curve arc from s- to s+
  and the straight segment back,

      S = S_L(s+) - S_L(s-) - p_center (q+ - q-),

  whose gradient with respect to the center is J xi (xi the chord vector);
* the tangent cross term D = t(s+) ^ t(s-), the square root of which
  normalizes the amplitude;
* index phases: mu caustic crossings along the arc and the sign of the
  difference of endpoint slopes sigma = sign(R).  Only the combination
  exp(-i mu pi/2 + i sigma pi/4) is frame independent, so both indices are
  evaluated in a rotated frame whose caustics avoid the chord endpoints.

The two-term oscillatory sum over chords with the prefactor
sqrt(2/(pi hbar)) |a a / sqrt(D)| reproduces the interference pattern of
the state's Wigner function away from the curve; near the curve the
transverse-delta line measure takes over.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (CausticEndpointError, DegenerateCenterError,
                     NearManifoldError)
from .geometry import wedge
from .manifold import Manifold1D, maslov_between

logger = logging.getLogger("chordal.chords")

__all__ = ["Chord", "find_chords", "chord_action", "chord_indices",
           "chord_phase_index", "wigner_semiclassical", "LineMeasure",
           "wigner_near_manifold_weight"]


@dataclass
class Chord:
    """A resolved chord: center, endpoints, action and indices."""

    center: np.ndarray
    s_plus: float
    s_minus: float
    x_plus: np.ndarray
    x_minus: np.ndarray
    xi: np.ndarray
    action: float
    d_value: float
    mu: int = 0
    eta: int = 0

    @property
    def length(self):
        return float(np.hypot(self.xi[0], self.xi[1]))


def _segment_boxes(m: Manifold1D, n_seg: int):
    """Bounding boxes of curve segments for the midpoint prefilter."""
    edges = np.linspace(m.s_min, m.s_max, n_seg + 1)
    fine = np.linspace(m.s_min, m.s_max, 8 * n_seg + 1)
    pts = m.position(fine)
    boxes = np.empty((n_seg, 4))  # p_lo, p_hi, q_lo, q_hi
    for k in range(n_seg):
        sel = (fine >= edges[k]) & (fine <= edges[k + 1])
        seg = pts[sel]
        boxes[k] = [seg[:, 0].min(), seg[:, 0].max(),
                    seg[:, 1].min(), seg[:, 1].max()]
    return edges, boxes


def _newton_polish(m, x, s_p, s_m, tol, max_iter=60):
    """Damped Newton iteration on the midpoint residual."""
    s = np.array([s_p, s_m], dtype=float)
    lo, hi = m.s_min, m.s_max
    for _ in range(max_iter):
        xp = m.position(s[0])
        xm = m.position(s[1])
        r = 0.5 * (xp + xm) - x
        if np.hypot(*r) < tol:
            return float(s[0]), float(s[1]), True
        J = 0.5 * np.column_stack([m.tangent(s[0]), m.tangent(s[1])])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-300:
            return float(s[0]), float(s[1]), False
        step = np.linalg.solve(J, r)
        # damp steps that would leave the parameter square
        lam = 1.0
        for _ in range(20):
            cand = s - lam * step
            if lo <= cand[0] <= hi and lo <= cand[1] <= hi:
                break
            lam *= 0.5
        s = s - lam * step
        s = np.clip(s, lo, hi)
    xp, xm = m.position(s[0]), m.position(s[1])
    ok = np.hypot(*(0.5 * (xp + xm) - x)) < tol
    return float(s[0]), float(s[1]), bool(ok)


def find_chords(m: Manifold1D, x, *, tol=None, n_seg=48,
                max_solutions=64, min_separation=None):
    """All chords of the curve with midpoint x, each with s+ > s-.

    Two-stage search: a coarse sign scan of the midpoint residual over
    segment pairs (with a bounding-box prefilter), then a damped Newton
    polish.  A continuum of solutions (center of a symmetric curve)
    raises :class:`DegenerateCenterError`.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("center must be finite")
    scale = max(np.ptp(m.points[:, 0]), np.ptp(m.points[:, 1]))
    if tol is None:
        tol = 1e-10 * max(scale, 1.0)
    if min_separation is None:
        min_separation = 2.0 * (m.length / len(m.s))

    edges, boxes = _segment_boxes(m, n_seg)
    # Minkowski prefilter: segment pair (i, j) can host a chord only if
    # x lies inside the averaged bounding boxes
    pad = 1e-9 * max(scale, 1.0)
    lo_p = 0.5 * (boxes[:, None, 0] + boxes[None, :, 0]) - pad
    hi_p = 0.5 * (boxes[:, None, 1] + boxes[None, :, 1]) + pad
    lo_q = 0.5 * (boxes[:, None, 2] + boxes[None, :, 2]) - pad
    hi_q = 0.5 * (boxes[:, None, 3] + boxes[None, :, 3]) + pad
    admissible = ((x[0] >= lo_p) & (x[0] <= hi_p)
                  & (x[1] >= lo_q) & (x[1] <= hi_q))

    sols = []
    n_sub = 12  # sample density per segment in the coarse scan
    for i in range(n_seg):
        for j in range(i, n_seg):
            if not admissible[i, j]:
                continue
            si = np.linspace(edges[i], edges[i + 1], n_sub)
            sj = np.linspace(edges[j], edges[j + 1], n_sub)
            Pi = m.position(si)
            Pj = m.position(sj)
            rp = 0.5 * (Pi[:, None, 0] + Pj[None, :, 0]) - x[0]
            rq = 0.5 * (Pi[:, None, 1] + Pj[None, :, 1]) - x[1]
            # cells where both residual components change sign
            def flips(r):
                a = (np.sign(r[:-1, :-1]) != np.sign(r[1:, :-1])) | \
                    (np.sign(r[:-1, :-1]) != np.sign(r[:-1, 1:])) | \
                    (np.sign(r[:-1, :-1]) != np.sign(r[1:, 1:]))
                return a
            cells = np.argwhere(flips(rp) & flips(rq))
            for (a, b) in cells:
                sp, sm, ok = _newton_polish(
                    m, x, 0.5 * (si[a] + si[a + 1]),
                    0.5 * (sj[b] + sj[b + 1]), tol)
                if not ok:
                    continue
                if sp < sm:
                    sp, sm = sm, sp
                if sp - sm < min_separation:
                    continue  # zero-length limit, not a genuine chord
                if any(abs(sp - c[0]) < min_separation
                       and abs(sm - c[1]) < min_separation for c in sols):
                    continue
                sols.append((sp, sm))
                if len(sols) > max_solutions:
                    raise DegenerateCenterError(
                        f"more than {max_solutions} chords through "
                        f"({x[0]:g}, {x[1]:g}); the center is degenerate")

    # a near-continuum shows up as many distinct solutions whose
    # endpoints describe the same family
    if len(sols) >= 12:
        raise DegenerateCenterError(
            f"{len(sols)} chords through ({x[0]:g}, {x[1]:g}); "
            "the center is degenerate")

    out = []
    for sp, sm in sorted(sols):
        xp, xm = m.position(sp), m.position(sm)
        xi = xp - xm
        tp, tm = m.tangent(sp), m.tangent(sm)
        d_val = float(wedge(tp, tm))
        S = chord_action(m, sp, sm, x)
        out.append(Chord(center=x.copy(), s_plus=sp, s_minus=sm,
                         x_plus=xp, x_minus=xm, xi=xi, action=S,
                         d_value=d_val))
    return out


def chord_action(m: Manifold1D, s_plus, s_minus, center=None) -> float:
    """Arc action minus the straight-chord term.

    Equals the symplectic area enclosed between the curve arc from s- to
    s+ and the chord, with sign fixed by the arc orientation.
    """
    xp = m.position(s_plus)
    xm = m.position(s_minus)
    if center is None:
        center = 0.5 * (xp + xm)
    center = np.asarray(center, dtype=float)
    dS_arc = float(m.action_at(s_plus) - m.action_at(s_minus))
    return dS_arc - float(center[0]) * (xp[1] - xm[1])


def chord_indices(m: Manifold1D, chord: Chord):
    """(mu, eta) in the position frame.

    mu counts caustic crossings along the arc; eta is 1 when the slope
    difference dp/dq|+ - dp/dq|- is negative, else 0.  Endpoints at a
    caustic make the slope ill-defined and raise.
    """
    tp = m.tangent(chord.s_plus)
    tm = m.tangent(chord.s_minus)
    for t, s in ((tp, chord.s_plus), (tm, chord.s_minus)):
        if abs(t[1]) < 1e-8 * np.hypot(*t):
            raise CausticEndpointError(
                f"chord endpoint at s = {s:g} lies on a caustic")
    mu = maslov_between(m, chord.s_minus, chord.s_plus)
    r_val = tp[0] / tp[1] - tm[0] / tm[1]
    eta = 1 if r_val < 0 else 0
    return mu, eta


def _rotated_q_derivs(m, s, theta):
    """d(q_theta)/ds and d2(q_theta)/ds2 in the frame rotated by theta."""
    t = m.tangent(s)
    t2 = m.second_derivative(s)
    sin, cos = np.sin(theta), np.cos(theta)
    g = sin * t[..., 0] + cos * t[..., 1]
    g2 = sin * t2[..., 0] + cos * t2[..., 1]
    return g, g2


def chord_phase_index(m: Manifold1D, s_plus, s_minus, *, theta=None):
    """Frame-invariant index phase of a chord, in units of pi/4.

    Returns an integer nu with phase factor exp(i nu pi / 4), where
    nu = sigma - 2 mu evaluated in a rotated frame admissible for both
    endpoints (endpoint tangents well off the frame's caustic direction);
    the combination is invariant mod 8 under the frame choice.
    """
    candidates = [theta] if theta is not None else \
        list(np.linspace(0.0, np.pi, 9)[:-1])
    last_err = None
    for th in candidates:
        tp_g, _ = _rotated_q_derivs(m, s_plus, th)
        tm_g, _ = _rotated_q_derivs(m, s_minus, th)
        tp = m.tangent(s_plus)
        tm = m.tangent(s_minus)
        if (abs(tp_g) < 0.2 * np.hypot(*tp)
                or abs(tm_g) < 0.2 * np.hypot(*tm)):
            last_err = CausticEndpointError(
                f"endpoint tangent too close to the frame caustic "
                f"direction at theta={th:g}")
            continue
        mu = _maslov_between_rotated(m, s_minus, s_plus, th)
        if mu is None:
            last_err = CausticEndpointError(
                f"caustic too close to an endpoint in frame theta={th:g}")
            continue
        slope_p = (np.sin(th) * tp[0] + np.cos(th) * tp[1])
        slope_m = (np.sin(th) * tm[0] + np.cos(th) * tm[1])
        r_val = ((np.cos(th) * tp[0] - np.sin(th) * tp[1]) / slope_p
                 - (np.cos(th) * tm[0] - np.sin(th) * tm[1]) / slope_m)
        sigma = 1 if r_val > 0 else -1
        return int(sigma - 2 * mu)
    raise last_err or CausticEndpointError("no admissible frame found")


def _maslov_between_rotated(m, s0, s1, theta, n_probe=None):
    """Signed caustic count of the theta-rotated curve along (s0, s1)."""
    lo, hi = (s0, s1) if s0 <= s1 else (s1, s0)
    if n_probe is None:
        n_probe = max(64, int(8 * len(m.s) * (hi - lo) / m.length))
    s = np.linspace(lo, hi, n_probe)
    g, _ = _rotated_q_derivs(m, s, theta)
    sign = np.sign(g)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    total = 0
    ds = (hi - lo) / (n_probe - 1)
    for k in flips:
        s_c = s[k] - g[k] * ds / (g[k + 1] - g[k])
        if min(abs(s_c - lo), abs(s_c - hi)) < 0.5 * ds:
            return None
        _, g2 = _rotated_q_derivs(m, s_c, theta)
        t = m.tangent(s_c)
        pdot_rot = np.cos(theta) * t[0] - np.sin(theta) * t[1]
        inc = int(np.sign(g2 * pdot_rot))
        if inc == 0:
            return None
        total += inc
    return total if s1 >= s0 else -total


def wigner_semiclassical(m: Manifold1D, x, hbar, *,
                         d_floor_angle=1e-6, return_chords=False):
    """Chord-sum approximation to the Wigner function at a point.

    Each chord contributes sqrt(2/(pi hbar)) conj(a(s-)) a(s+) / sqrt|D|
    times exp(i S/hbar + i nu pi/4) plus its conjugate, with nu the
    frame-invariant index from :func:`chord_phase_index`.  Chords whose
    endpoint tangents are parallel within ``d_floor_angle`` make the
    prefactor diverge and raise :class:`NearManifoldError` (the
    transverse-delta regime applies there instead).
    """
    chords = find_chords(m, x)
    total = 0.0 + 0.0j
    for c in chords:
        tp, tm = m.tangent(c.s_plus), m.tangent(c.s_minus)
        sin_angle = abs(c.d_value) / (np.hypot(*tp) * np.hypot(*tm))
        if sin_angle < d_floor_angle:
            raise NearManifoldError(
                f"chord at ({x[0]:g}, {x[1]:g}) has near-parallel endpoint "
                f"tangents (angle {sin_angle:.2e}); evaluate the "
                "transverse-delta form instead")
        nu = chord_phase_index(m, c.s_plus, c.s_minus)
        amp = (np.conj(m.amplitude(c.s_minus)) * m.amplitude(c.s_plus)
               / np.sqrt(abs(c.d_value)))
        total += amp * np.exp(1j * (c.action / hbar + nu * np.pi / 4))
    value = float(np.sqrt(2.0 / (np.pi * hbar)) * 2.0 * total.real)
    if return_chords:
        return value, chords
    return value


@dataclass
class LineMeasure:
    """The transverse-delta weight of a curve: density |a(s)|^2 ds."""

    s: np.ndarray
    points: np.ndarray
    density: np.ndarray

    def integrate(self, f=None):
        """int |a|^2 f(p, q) ds (f defaults to 1)."""
        vals = self.density if f is None else \
            self.density * f(self.points[:, 0], self.points[:, 1])
        return float(np.trapezoid(vals, self.s))


def wigner_near_manifold_weight(m: Manifold1D) -> LineMeasure:
    """Line measure carried by the curve in the near-manifold limit."""
    return LineMeasure(s=m.s.copy(), points=m.points.copy(),
                       density=np.abs(m.amp) ** 2)
