"""Smooth phase-space observables.

An observable is described by its phase-space symbol O(p, q), the classical
length scale on which it varies, and a rectangle outside which it is
negligible.  Symbols must vary slowly on the quantum scale; that smoothness
is declared by the caller and only spot-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Observable", "obs_q", "obs_p", "obs_q2", "obs_energy",
           "gaussian_observable", "cylinder_gaussian_observable"]


@dataclass(frozen=True)
class Observable:
    """Phase-space symbol with declared smoothness and support.

    symbol(p, q) must be vectorized; support_box is (p_min, p_max, q_min,
    q_max); q_period marks symbols periodic in q (cylinder phase space).
    """

    name: str
    symbol: callable
    length_scale: float
    support_box: tuple
    q_period: float = None

    def __call__(self, p, q):
        return self.symbol(np.asarray(p, dtype=float), np.asarray(q, dtype=float))

    def on_points(self, points):
        pts = np.asarray(points, dtype=float)
        return self(pts[..., 0], pts[..., 1])

    def smoothness_ratio(self, hbar, n_probe=128, rng=None):
        """max |grad O| * hbar / (scale of O), sampled over the support box."""
        rng = rng or np.random.default_rng(0)
        p_lo, p_hi, q_lo, q_hi = self.support_box
        p = rng.uniform(p_lo, p_hi, n_probe)
        q = rng.uniform(q_lo, q_hi, n_probe)
        eps = 1e-6 * max(p_hi - p_lo, q_hi - q_lo)
        dOdp = (self(p + eps, q) - self(p - eps, q)) / (2 * eps)
        dOdq = (self(p, q + eps) - self(p, q - eps)) / (2 * eps)
        grad = np.hypot(dOdp, dOdq)
        scale = max(np.max(np.abs(self(p, q))), 1e-30)
        return float(np.max(grad) * hbar / (scale * self.length_scale))


def _box(p_c, q_c, half_p, half_q):
    return (p_c - half_p, p_c + half_p, q_c - half_q, q_c + half_q)


def obs_q(box=(-10.0, 10.0, -10.0, 10.0)):
    return Observable("q", lambda p, q: q + 0.0 * p, 1.0, box)


def obs_p(box=(-10.0, 10.0, -10.0, 10.0)):
    return Observable("p", lambda p, q: p + 0.0 * q, 1.0, box)


def obs_q2(box=(-10.0, 10.0, -10.0, 10.0)):
    return Observable("q2", lambda p, q: q * q + 0.0 * p, 1.0, box)


def obs_energy(box=(-10.0, 10.0, -10.0, 10.0)):
    return Observable("q2+p2", lambda p, q: q * q + p * p, 1.0, box)


def gaussian_observable(p_center=0.0, q_center=0.0, sigma_p=1.0, sigma_q=1.0,
                        amplitude=1.0, cut=5.0):
    """Gaussian bump exp(-(p-p0)^2/2sp^2 - (q-q0)^2/2sq^2)."""

    def symbol(p, q):
        return amplitude * np.exp(
            -0.5 * ((p - p_center) / sigma_p) ** 2
            - 0.5 * ((q - q_center) / sigma_q) ** 2)

    return Observable(
        "gaussian", symbol, min(sigma_p, sigma_q),
        _box(p_center, q_center, cut * sigma_p, cut * sigma_q))


def cylinder_gaussian_observable(p_center=0.0, q_center=np.pi, sigma_p=1.0,
                                 kappa_q=4.0, amplitude=1.0, cut=5.0):
    """Smooth bump on the cylinder: Gaussian in p, von-Mises-like in q.

    exp(kappa (cos(q - q0) - 1)) is 2 pi periodic and concentrates on a
    scale 1/sqrt(kappa) around q0.
    """

    def symbol(p, q):
        return amplitude * np.exp(
            -0.5 * ((p - p_center) / sigma_p) ** 2
            + kappa_q * (np.cos(q - q_center) - 1.0))

    sigma_q = 1.0 / np.sqrt(kappa_q)
    return Observable(
        "cylinder-gaussian", symbol, min(sigma_p, sigma_q),
        _box(p_center, q_center, cut * sigma_p, min(cut * sigma_q, np.pi)),
        q_period=2 * np.pi)
