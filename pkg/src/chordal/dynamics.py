"""Classical dynamics: split continuous Hamiltonians H = T(p) + V(q),
periodically kicked maps, tangent maps, manifold transport, and the
interference onset-time estimate.

The continuous integrator is the symmetric kick-drift-kick splitting
(Strang/leapfrog); kicked maps are composed exactly.  Both preserve the
symplectic form to round-off, which is the property everything downstream
relies on.  The quantum solver applies the same splitting with the same
step, so quadratic benchmark systems evolve under exactly the same
(slightly frequency-shifted) dynamics on both sides of a comparison.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import EscapeError, SampleBudgetError
from .manifold import Manifold1D

__all__ = [
    "SplitHamiltonian",
    "KickedMap",
    "harmonic_oscillator",
    "quartic_oscillator",
    "standard_map",
    "flow",
    "tangent_map",
    "propagate_manifold",
    "estimate_tsc",
]


class SplitHamiltonian:
    """Continuous system H = T(p) + V(q) with smooth scalar parts.

    All six callables must be vectorized over numpy arrays.
    """

    kind = "split-continuous"

    def __init__(self, name, T, dT, d2T, V, dV, d2V, default_dt=0.001):
        self.name = name
        self.T, self.dT, self.d2T = T, dT, d2T
        self.V, self.dV, self.d2V = V, dV, d2V
        self.default_dt = default_dt
        self.q_period = None

    def energy(self, points):
        pts = np.asarray(points, dtype=float)
        return self.T(pts[..., 0]) + self.V(pts[..., 1])

    def _steps(self, t, dt):
        dt = self.default_dt if dt is None else dt
        n = max(1, int(np.ceil(abs(t) / dt - 1e-12)))
        return n, t / n

    def flow_points(self, points, t, dt=None):
        """Advance an (..., 2) array of (p, q) points by time t >= 0."""
        if t < 0:
            raise ValueError("flow time must be non-negative")
        pts = np.array(points, dtype=float, copy=True)
        if t == 0:
            return pts
        n, h = self._steps(t, dt)
        p, q = pts[..., 0], pts[..., 1]
        # kick-drift-kick with fused half steps between iterations
        p -= 0.5 * h * self.dV(q)
        for k in range(n):
            q += h * self.dT(p)
            if k + 1 < n:
                p -= h * self.dV(q)
        p -= 0.5 * h * self.dV(q)
        return pts

    def flow_with_tangent(self, point, t, dt=None):
        """Flow a single point and the 2x2 tangent map along with it."""
        if t < 0:
            raise ValueError("flow time must be non-negative")
        x = np.array(point, dtype=float, copy=True)
        m = np.eye(2)
        if t == 0:
            return x, m
        n, h = self._steps(t, dt)

        def kick(hh):
            x[0] -= hh * self.dV(x[1])
            # p' = p - hh V'(q): d p'/dq = -hh V''
            m[0, :] -= hh * self.d2V(x[1]) * m[1, :]

        def drift(hh):
            x[1] += hh * self.dT(x[0])
            m[1, :] += hh * self.d2T(x[0]) * m[0, :]

        kick(0.5 * h)
        for k in range(n):
            drift(h)
            if k + 1 < n:
                kick(h)
        kick(0.5 * h)
        return x, m


class KickedMap:
    """Area-preserving map: kick p -> p - V'(q), then drift q -> q + T'(p).

    One application corresponds to one period of the periodically kicked
    Hamiltonian; the time argument of :func:`flow` must be a non-negative
    integer number of periods.  ``q_period`` marks cylinder topology; the
    map itself keeps q unrolled on the covering plane so curves stay
    continuous, and consumers reduce q modulo the period where needed.
    """

    kind = "kicked-map"

    def __init__(self, name, T, dT, d2T, V, dV, d2V, q_period=None):
        self.name = name
        self.T, self.dT, self.d2T = T, dT, d2T
        self.V, self.dV, self.d2V = V, dV, d2V
        self.q_period = q_period
        self.default_dt = None

    def _check_time(self, t):
        n = int(round(t))
        if abs(t - n) > 1e-9 or n < 0:
            raise ValueError(
                f"kicked map time must be a non-negative integer, got {t!r}")
        return n

    def flow_points(self, points, t, dt=None):
        n = self._check_time(t)
        pts = np.array(points, dtype=float, copy=True)
        p, q = pts[..., 0], pts[..., 1]
        for _ in range(n):
            p -= self.dV(q)
            q += self.dT(p)
        return pts

    def flow_with_tangent(self, point, t, dt=None):
        n = self._check_time(t)
        x = np.array(point, dtype=float, copy=True)
        m = np.eye(2)
        for _ in range(n):
            x[0] -= self.dV(x[1])
            m[0, :] -= self.d2V(x[1]) * m[1, :]
            x[1] += self.dT(x[0])
            m[1, :] += self.d2T(x[0]) * m[0, :]
        return x, m


def harmonic_oscillator(omega=1.0):
    """H = p^2/2 + omega^2 q^2 / 2."""
    w2 = omega * omega
    return SplitHamiltonian(
        "harmonic",
        T=lambda p: 0.5 * p * p, dT=lambda p: p, d2T=lambda p: np.ones_like(p),
        V=lambda q: 0.5 * w2 * q * q, dV=lambda q: w2 * q,
        d2V=lambda q: w2 * np.ones_like(q),
    )


def quartic_oscillator(a=1.0, b=0.0):
    """H = p^2/2 + a q^4/4 + b q^2/2."""
    return SplitHamiltonian(
        "quartic",
        T=lambda p: 0.5 * p * p, dT=lambda p: p, d2T=lambda p: np.ones_like(p),
        V=lambda q: 0.25 * a * q ** 4 + 0.5 * b * q * q,
        dV=lambda q: a * q ** 3 + b * q,
        d2V=lambda q: 3 * a * q * q + b,
    )


def standard_map(kick=1.0):
    """Kicked rotor on the cylinder: p' = p + K sin q, q' = q + p'."""
    K = float(kick)
    return KickedMap(
        "standard-map",
        T=lambda p: 0.5 * p * p, dT=lambda p: p, d2T=lambda p: np.ones_like(p),
        V=lambda q: K * np.cos(q), dV=lambda q: -K * np.sin(q),
        d2V=lambda q: -K * np.cos(q),
        q_period=2 * np.pi,
    )


def _check_escape(points, box, time):
    if box is None:
        return
    p, q = points[..., 0], points[..., 1]
    out = ((p < box[0]) | (p > box[1]) | (q < box[2]) | (q > box[3]))
    n_out = int(np.count_nonzero(out))
    if n_out:
        raise EscapeError(time, n_out)


def flow(sys, x, t, dt=None, escape_box=None):
    """Image of phase point(s) x under the flow of ``sys`` for time t.

    ``escape_box`` is (p_min, p_max, q_min, q_max); leaving it raises
    :class:`EscapeError` rather than returning silently bad points.
    """
    pts = sys.flow_points(np.asarray(x, dtype=float), t, dt)
    _check_escape(pts, escape_box, t)
    return pts


def tangent_map(sys, x, t, dt=None):
    """2x2 linearization of the time-t flow along the trajectory of x."""
    _, m = sys.flow_with_tangent(np.asarray(x, dtype=float), t, dt)
    return m


def propagate_manifold(m0: Manifold1D, sys, t, *, dt=None,
                       max_spacing=None, max_samples=200_000,
                       escape_box=None) -> Manifold1D:
    """Transport a manifold with the flow, refining where it stretches.

    Each sample keeps its label s and its amplitude a(s); refinement
    inserts parameter midpoints and integrates the new trajectories from
    their initial conditions on the original curve, so the result stays
    exactly on the evolved manifold instead of interpolating it.  The
    cumulative action is recomputed on the evolved curve (a global
    constant, irrelevant to every intra-curve difference, is dropped).
    """
    if max_spacing is None:
        scale = max(np.ptp(m0.points[:, 0]), np.ptp(m0.points[:, 1]), 1.0)
        max_spacing = 0.05 * scale

    s = np.array(m0.s, dtype=float)
    x0 = np.array(m0.points, dtype=float)
    xt = flow(sys, x0, t, dt, escape_box)

    for _ in range(64):
        gap = np.hypot(*np.diff(xt, axis=0).T)
        bad = np.nonzero(gap > max_spacing)[0]
        if len(bad) == 0:
            break
        if len(s) + len(bad) > max_samples:
            raise SampleBudgetError(t, len(s) + len(bad), max_samples)
        s_mid = 0.5 * (s[bad] + s[bad + 1])
        x0_mid = m0.position(s_mid)
        xt_mid = flow(sys, x0_mid, t, dt, escape_box)
        order = np.argsort(np.concatenate([s, s_mid]))
        s = np.concatenate([s, s_mid])[order]
        xt = np.concatenate([xt, xt_mid], axis=0)[order]
    else:
        raise SampleBudgetError(t, len(s), max_samples)

    amp = m0.amplitude(s)
    closed = m0.closed
    if closed and sys.q_period is not None:
        # on the cylinder a loop may not close on the covering plane
        closed = np.hypot(*(xt[-1] - xt[0])) < 1e-9
    return Manifold1D(s, xt, amp, closed=closed, q_period=sys.q_period)


def estimate_tsc(lyapunov, volume, l_obs, l0, hbar):
    """Onset time of short-chord interference.

    (1/lambda) log(V l / (hbar l0)): logarithmic in hbar, so a short time.
    Exposed as a diagnostic; the observable scale l is caller-supplied.
    """
    for name, v in [("lyapunov", lyapunov), ("volume", volume),
                    ("l_obs", l_obs), ("l0", l0), ("hbar", hbar)]:
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v!r}")
    arg = volume * l_obs / (hbar * l0)
    if arg <= 0:
        raise ValueError(f"logarithm argument must be positive, got {arg!r}")
    return np.log(arg) / lyapunov
