"""One-dimensional Lagrangian manifolds as sampled phase-space curves.

A curve is stored as ordered samples (s, p(s), q(s), a(s)) together with the
cumulative action S(s) = int p dq and a signed count of caustic crossings.
Caustics are the points where dq/ds changes sign; crossing one while the
tangent rotates clockwise in the (q, p) plane increments the count by +1
(equivalently, the increment is sign(q'' * p') at the crossing).  Traversed
along the Hamiltonian flow, a convex loop then accumulates a count of +2 per
revolution, the value entering the closed-curve quantization condition

    oint p dq = (n + mu/4) * 2 pi hbar .

Manifolds are immutable after construction; every query is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import AmbiguousCausticError
from .geometry import _check_finite

__all__ = [
    "CausticRecord",
    "Manifold1D",
    "build_from_graph",
    "build_circle",
    "build_line",
    "action_between",
    "maslov_between",
    "ebk_check",
    "reparametrize",
]


@dataclass(frozen=True)
class CausticRecord:
    """A point where the projection onto the q axis turns around.

    ``kind`` is the sign of d2q/ds2 at the crossing (which way the fold
    opens); ``increment`` is the signed Maslov step picked up when the
    caustic is traversed in the direction of increasing s.
    """

    s: float
    kind: int
    increment: int


class Manifold1D:
    """A sampled phase-space curve with action and caustic bookkeeping."""

    def __init__(self, s, points, amp, *, closed=False, q_period=None,
                 _skip_checks=False):
        s = np.asarray(s, dtype=float)
        points = np.asarray(points, dtype=float)
        amp = np.asarray(amp, dtype=complex)
        if not _skip_checks:
            _check_finite(s, "parameter values")
            _check_finite(points, "manifold points")
            _check_finite(amp.view(float), "amplitude samples")
            if s.ndim != 1 or len(s) < 4:
                raise ValueError("need at least 4 samples along the curve")
            if np.any(np.diff(s) <= 0):
                raise ValueError("parameter values must be strictly increasing")
            if points.shape != (len(s), 2):
                raise ValueError("points must have shape (n, 2) in (p, q) order")
            if amp.shape != (len(s),):
                raise ValueError("amplitude must have one value per sample")
            if closed:
                gap = np.hypot(*(points[-1] - points[0]))
                scale = max(np.ptp(points[:, 0]), np.ptp(points[:, 1]), 1e-30)
                if gap > 1e-9 * scale:
                    raise ValueError(
                        f"closed manifold endpoints differ by {gap:g}")
                amp_gap = abs(amp[-1] - amp[0])
                if amp_gap > 1e-9 * max(np.max(np.abs(amp)), 1e-30):
                    raise ValueError(
                        f"closed manifold amplitude has a seam jump of {amp_gap:g}")
                # exact match keeps the periodic splines happy
                points = points.copy()
                points[-1] = points[0]
                amp = amp.copy()
                amp[-1] = amp[0]

        self.s = s
        self.points = points
        self.amp = amp
        self.closed = bool(closed)
        self.q_period = q_period

        bc = "periodic" if self.closed else "not-a-knot"
        self._p_spl = CubicSpline(s, points[:, 0], bc_type=bc)
        self._q_spl = CubicSpline(s, points[:, 1], bc_type=bc)
        self._amp_re = CubicSpline(s, amp.real, bc_type=bc)
        self._amp_im = CubicSpline(s, amp.imag, bc_type=bc)

        # cumulative action int p dq along the curve
        dq = self._q_spl(s, 1)
        self.action = np.concatenate(
            [[0.0], cumulative_trapezoid(points[:, 0] * dq, s)])
        self._S_spl = CubicSpline(s, self.action)

        self.caustics = self._detect_caustics()
        self._caustic_s = np.array([c.s for c in self.caustics])
        self._caustic_inc = np.array([c.increment for c in self.caustics], dtype=int)
        # cumulative signed count at each sample
        if len(self.caustics):
            self.maslov = np.searchsorted(self._caustic_s, s, side="right")
            self.maslov = np.array(
                [int(self._caustic_inc[: k].sum()) for k in self.maslov])
        else:
            self.maslov = np.zeros(len(s), dtype=int)

        for arr in (self.s, self.points, self.amp, self.action):
            arr.setflags(write=False)

    # -- basic queries ----------------------------------------------------

    @property
    def s_min(self):
        return float(self.s[0])

    @property
    def s_max(self):
        return float(self.s[-1])

    @property
    def length(self):
        return self.s_max - self.s_min

    def position(self, s):
        """Point(s) on the curve, shape (..., 2) in (p, q) order."""
        s = np.asarray(s, dtype=float)
        return np.stack([self._p_spl(s), self._q_spl(s)], axis=-1)

    def tangent(self, s):
        """d(p, q)/ds, shape (..., 2)."""
        s = np.asarray(s, dtype=float)
        return np.stack([self._p_spl(s, 1), self._q_spl(s, 1)], axis=-1)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self._p_spl(s, 2), self._q_spl(s, 2)], axis=-1)

    def amplitude(self, s):
        s = np.asarray(s, dtype=float)
        return self._amp_re(s) + 1j * self._amp_im(s)

    def action_at(self, s):
        s = np.asarray(s, dtype=float)
        return self._S_spl(s)

    def density_norm(self):
        """int |a(s)|^2 ds over the whole curve (spline quadrature)."""
        dens = CubicSpline(self.s, np.abs(self.amp) ** 2)
        return float(dens.integrate(self.s_min, self.s_max))

    def normalized(self):
        """Copy with int |a|^2 ds = 1."""
        norm = self.density_norm()
        if norm <= 0:
            raise ValueError("amplitude density integrates to zero")
        return Manifold1D(self.s, self.points, self.amp / np.sqrt(norm),
                          closed=self.closed, q_period=self.q_period)

    def with_amplitude(self, amp):
        return Manifold1D(self.s, self.points, amp, closed=self.closed,
                          q_period=self.q_period)

    def transformed(self, symplectic_map):
        """Image of the curve under a linear symplectic map.

        Labels s and the density a(s) ride along unchanged; the action is
        recomputed on the image curve.
        """
        pts = symplectic_map.apply(self.points)
        return Manifold1D(self.s, pts, self.amp, closed=self.closed)

    # -- caustics ----------------------------------------------------------

    def _detect_caustics(self):
        s = self.s
        g = self._q_spl(s, 1)  # dq/ds at the samples
        out = []
        for i in range(len(s) - 1):
            if g[i] == 0.0:
                # zero exactly on a sample: attribute it to this cell
                s_c = s[i]
            elif g[i] * g[i + 1] < 0.0:
                # linear interpolation of dq/ds between samples
                s_c = s[i] - g[i] * (s[i + 1] - s[i]) / (g[i + 1] - g[i])
            else:
                continue
            # polish on the spline (a few Newton steps, bounded to the cell)
            for _ in range(8):
                g_c = self._q_spl(s_c, 1)
                gp_c = self._q_spl(s_c, 2)
                if gp_c == 0.0:
                    break
                step = g_c / gp_c
                s_new = min(max(s_c - step, s[i]), s[i + 1])
                if abs(s_new - s_c) < 1e-14 * max(1.0, abs(s_c)):
                    s_c = s_new
                    break
                s_c = s_new
            kind = int(np.sign(self._q_spl(s_c, 2)))
            inc = int(np.sign(self._q_spl(s_c, 2) * self._p_spl(s_c, 1)))
            if inc == 0:
                raise ValueError(
                    f"degenerate caustic at s = {s_c:g}: tangent and curvature "
                    "vanish together")
            out.append(CausticRecord(float(s_c), kind, inc))
        return out

    def local_spacing(self, s):
        idx = np.clip(np.searchsorted(self.s, s) - 1, 0, len(self.s) - 2)
        return float(self.s[idx + 1] - self.s[idx])

    # -- serialization ------------------------------------------------------

    def to_csv(self, path, meta_path=None):
        """Write samples as CSV `s,q,p,re_a,im_a,S,mu` plus a JSON sidecar."""
        cols = np.column_stack([
            self.s, self.points[:, 1], self.points[:, 0],
            self.amp.real, self.amp.imag, self.action, self.maslov,
        ])
        header = "s,q,p,re_a,im_a,S,mu"
        np.savetxt(path, cols, delimiter=",", header=header, comments="",
                   fmt="%.17g")
        meta = {"closed": self.closed, "q_period": self.q_period,
                "n_samples": int(len(self.s))}
        if meta_path is None:
            meta_path = str(path) + ".meta.json"
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)

    @staticmethod
    def from_csv(path, meta_path=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if meta_path is None:
            meta_path = str(path) + ".meta.json"
        with open(meta_path) as fh:
            meta = json.load(fh)
        s = data[:, 0]
        points = np.column_stack([data[:, 2], data[:, 1]])  # file order is q,p
        amp = data[:, 3] + 1j * data[:, 4]
        return Manifold1D(s, points, amp, closed=meta["closed"],
                          q_period=meta.get("q_period"))


# -- constructors -----------------------------------------------------------


def build_from_graph(p_of_q, q_range, n, a_of_s=None, *, param="arclength"):
    """Manifold from a graph p = p(q) over an interval.

    Parameters
    ----------
    p_of_q : callable
        Vectorized momentum profile; must return finite values on q_range.
    q_range : (float, float)
        Position interval.
    n : int
        Number of samples, at least 16.
    a_of_s : callable, optional
        Amplitude density as a function of the curve parameter; defaults
        to 1.  Evaluated after the parametrization has been fixed.
    param : {"arclength", "q"}
        Curve parameter: Euclidean arc length (ds^2 = dp^2 + dq^2) or
        the position itself.
    """
    if n < 16:
        raise ValueError("need n >= 16 samples")
    q_lo, q_hi = float(q_range[0]), float(q_range[1])
    if not q_lo < q_hi:
        raise ValueError("q_range must be increasing")

    q_fine = np.linspace(q_lo, q_hi, max(8 * n, 1024))
    p_fine = np.asarray(p_of_q(q_fine), dtype=float)
    bad = ~np.isfinite(p_fine)
    if np.any(bad):
        raise ValueError(
            f"p(q) is not finite at q = {q_fine[bad][0]:g}")

    if param == "q":
        q_s = np.linspace(q_lo, q_hi, n)
        s = q_s
    elif param == "arclength":
        dp_dq = np.gradient(p_fine, q_fine)
        ell = np.concatenate(
            [[0.0], cumulative_trapezoid(np.hypot(1.0, dp_dq), q_fine)])
        s = np.linspace(0.0, ell[-1], n)
        q_s = np.interp(s, ell, q_fine)
    else:
        raise ValueError(f"unknown parametrization {param!r}")

    p_s = np.asarray(p_of_q(q_s), dtype=float)
    amp = np.ones(n, dtype=complex) if a_of_s is None else \
        np.asarray(a_of_s(s), dtype=complex) * np.ones(n)
    return Manifold1D(s, np.column_stack([p_s, q_s]), amp)


def build_line(p0, q_range, n, a_of_s=None):
    """Horizontal line p = p0; parameter is q itself."""
    return build_from_graph(lambda q: np.full_like(np.asarray(q, float), p0),
                            q_range, n, a_of_s, param="q")


def build_circle(r, orientation=1, n=256, center=(0.0, 0.0), a_of_s=None):
    """Closed circle of radius r, parametrized by arc length.

    orientation +1 traverses the circle along the harmonic flow
    (clockwise in the (q, p) plane), giving oint p dq = +pi r^2 and a
    Maslov count of +2 per loop; -1 reverses both signs.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if n < 16:
        raise ValueError("need n >= 16 samples")
    if orientation not in (+1, -1):
        raise ValueError("orientation must be +1 or -1")
    s = np.linspace(0.0, 2 * np.pi * r, n + 1)
    theta = orientation * s / r + np.pi / 2  # start away from a q-caustic
    q = center[1] + r * np.cos(theta)
    p = center[0] - r * np.sin(theta)
    amp = np.ones(n + 1, dtype=complex) if a_of_s is None else \
        np.asarray(a_of_s(s), dtype=complex) * np.ones(n + 1)
    amp[-1] = amp[0]
    return Manifold1D(s, np.column_stack([p, q]), amp, closed=True)


# -- curve functionals --------------------------------------------------------


def _check_range(m, s):
    if s < m.s_min - 1e-12 or s > m.s_max + 1e-12:
        raise ValueError(
            f"parameter {s:g} outside [{m.s_min:g}, {m.s_max:g}]")
    return min(max(s, m.s_min), m.s_max)


def action_between(m: Manifold1D, s0: float, s1: float) -> float:
    """Path integral of p dq along the curve from s0 to s1."""
    s0 = _check_range(m, s0)
    s1 = _check_range(m, s1)
    return float(m.action_at(s1) - m.action_at(s0))


def maslov_between(m: Manifold1D, s0: float, s1: float) -> int:
    """Signed number of caustics crossed going from s0 to s1."""
    s0 = _check_range(m, s0)
    s1 = _check_range(m, s1)
    if len(m.caustics) == 0:
        return 0
    lo, hi = (s0, s1) if s0 <= s1 else (s1, s0)
    for c in m.caustics:
        for endpoint in (s0, s1):
            if abs(c.s - endpoint) < m.local_spacing(endpoint):
                raise AmbiguousCausticError(
                    f"caustic at s = {c.s:g} within one sample spacing of "
                    f"evaluation endpoint {endpoint:g}; perturb the interval")
    total = sum(c.increment for c in m.caustics if lo < c.s < hi)
    return int(total if s1 >= s0 else -total)


def ebk_check(m: Manifold1D, hbar: float):
    """Nearest quantum number and residual of the closed-curve condition.

    Returns (n, residual) with residual = oint p dq - (n + mu/4) 2 pi hbar.
    """
    if not m.closed:
        raise ValueError("quantization condition applies to closed manifolds only")
    loop_action = float(m.action[-1])
    mu_loop = int(sum(c.increment for c in m.caustics))
    x = loop_action / (2 * np.pi * hbar) - mu_loop / 4.0
    n = int(np.round(x))
    residual = loop_action - (n + mu_loop / 4.0) * 2 * np.pi * hbar
    return n, residual


def reparametrize(m: Manifold1D, s_new_of_s) -> Manifold1D:
    """Relabel the curve with a strictly monotone new parameter.

    The amplitude density transforms as a -> a / sqrt(|ds_new/ds|), which
    keeps int |a|^2 ds and every downstream amplitude ratio invariant.
    """
    s_new = np.asarray(s_new_of_s(m.s), dtype=float)
    d = np.diff(s_new)
    if np.all(d > 0):
        reverse = False
    elif np.all(d < 0):
        reverse = True
    else:
        raise ValueError("reparametrization map is not strictly monotone")
    eps = 6e-6 * max(1.0, float(np.max(np.abs(m.s))))
    jac = (np.asarray(s_new_of_s(m.s + eps), dtype=float)
           - np.asarray(s_new_of_s(m.s - eps), dtype=float)) / (2 * eps)
    amp = m.amp / np.sqrt(np.abs(jac))
    if reverse:
        return Manifold1D(s_new[::-1], m.points[::-1], amp[::-1],
                          closed=m.closed, q_period=m.q_period)
    return Manifold1D(s_new, m.points, amp, closed=m.closed,
                      q_period=m.q_period)
