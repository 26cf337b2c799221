"""Phase-space primitives: points, the symplectic wedge product, linear
symplectic maps, and uniform phase-space grids.

Conventions used throughout the package:

* a phase-space point is the ordered pair x = (p, q); arrays of points
  have shape (..., 2) with component 0 = p and component 1 = q;
* the wedge product of two points is

      wedge(x, y) = p_x * q_y - q_x * p_y ,

  i.e. the signed symplectic area of the parallelogram they span (this is
  y^T J x with J = [[0, -1], [1, 0]] acting on (p, q) columns);
* a 2x2 linear map is accepted as symplectic when |det - 1| <= 1e-12.

All objects here are immutable and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMPLECTIC_DET_TOL = 1e-12


def _check_finite(arr, what):
    a = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")
    return a


@dataclass(frozen=True)
class PhasePoint:
    """A single phase-space point x = (p, q)."""

    p: float
    q: float

    def __post_init__(self):
        if not (np.isfinite(self.p) and np.isfinite(self.q)):
            raise ValueError(f"non-finite phase point (p={self.p}, q={self.q})")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.q], dtype=float)

    @staticmethod
    def from_array(x) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        return PhasePoint(float(x[..., 0]), float(x[..., 1]))

    def __add__(self, other):
        return PhasePoint(self.p + other.p, self.q + other.q)

    def __sub__(self, other):
        return PhasePoint(self.p - other.p, self.q - other.q)

    def __mul__(self, c):
        return PhasePoint(c * self.p, c * self.q)

    __rmul__ = __mul__


def _coords(x):
    """Return (p, q) component arrays for PhasePoint or (..., 2) input."""
    if isinstance(x, PhasePoint):
        return x.p, x.q
    a = np.asarray(x, dtype=float)
    return a[..., 0], a[..., 1]


def wedge(x, y):
    """Symplectic area wedge(x, y) = p_x q_y - q_x p_y.

    Accepts PhasePoint instances or arrays of shape (..., 2); broadcasts
    like the underlying component arithmetic.  Antisymmetric and bilinear.
    """
    px, qx = _coords(x)
    py, qy = _coords(y)
    return px * qy - qx * py


@dataclass(frozen=True)
class LinearSymplecticMap:
    """A 2x2 real matrix with unit determinant, acting on (p, q) columns."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        _check_finite(m, "symplectic map matrix")
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det - 1.0) > SYMPLECTIC_DET_TOL:
            raise ValueError(f"matrix is not symplectic: det = {det!r}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @staticmethod
    def identity() -> "LinearSymplecticMap":
        return LinearSymplecticMap(np.eye(2))

    @staticmethod
    def rotation(theta: float) -> "LinearSymplecticMap":
        """Rotation by theta in the (p, q) plane (orthogonal, det 1)."""
        c, s = np.cos(theta), np.sin(theta)
        return LinearSymplecticMap(np.array([[c, -s], [s, c]]))

    @staticmethod
    def shear_q(c: float) -> "LinearSymplecticMap":
        """(p, q) -> (p, q + c p)."""
        return LinearSymplecticMap(np.array([[1.0, 0.0], [c, 1.0]]))

    @staticmethod
    def shear_p(c: float) -> "LinearSymplecticMap":
        """(p, q) -> (p + c q, q)."""
        return LinearSymplecticMap(np.array([[1.0, c], [0.0, 1.0]]))

    @staticmethod
    def random(rng: np.random.Generator, scale: float = 1.0) -> "LinearSymplecticMap":
        """Random composition shear_p . rotation . shear_q, Iwasawa-style."""
        theta = rng.uniform(0.0, 2 * np.pi)
        a = rng.uniform(-scale, scale)
        b = rng.uniform(-scale, scale)
        m = (
            LinearSymplecticMap.shear_p(a)
            .compose(LinearSymplecticMap.rotation(theta))
            .compose(LinearSymplecticMap.shear_q(b))
        )
        return m

    def apply(self, x):
        """Apply to a PhasePoint or an (..., 2) array of points."""
        if isinstance(x, PhasePoint):
            v = self.m @ x.as_array()
            return PhasePoint(float(v[0]), float(v[1]))
        a = np.asarray(x, dtype=float)
        return a @ self.m.T

    __call__ = apply

    def compose(self, other: "LinearSymplecticMap") -> "LinearSymplecticMap":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        return LinearSymplecticMap(self.m @ other.m)

    def inverse(self) -> "LinearSymplecticMap":
        m = self.m
        inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
        return LinearSymplecticMap(inv)


@dataclass(frozen=True)
class PhaseGrid:
    """A uniform rectangular sampling of phase space."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int

    def __post_init__(self):
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise ValueError("grid bounds must be strictly ordered")
        if self.n_q < 2 or self.n_p < 2:
            raise ValueError("grid needs at least 2 samples per axis")
        _check_finite([self.q_min, self.q_max, self.p_min, self.p_max], "grid bounds")

    @property
    def q_axis(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.n_q)

    @property
    def p_axis(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def points(self) -> np.ndarray:
        """All grid points as an (n_p, n_q, 2) array in (p, q) order."""
        pp, qq = np.meshgrid(self.p_axis, self.q_axis, indexing="ij")
        return np.stack([pp, qq], axis=-1)

    def contains(self, x) -> np.ndarray:
        p, q = _coords(x)
        return (
            (p >= self.p_min) & (p <= self.p_max)
            & (q >= self.q_min) & (q <= self.q_max)
        )
