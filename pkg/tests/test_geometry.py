import numpy as np
import pytest

from chordal.geometry import (LinearSymplecticMap, PhaseGrid, PhasePoint,
                              wedge)


def test_wedge_unit_basis_pair():
    assert wedge(PhasePoint(1, 0), PhasePoint(0, 1)) == 1.0


def test_wedge_self_is_zero():
    x = PhasePoint(0.7, -2.3)
    assert wedge(x, x) == 0.0


def test_wedge_direct_arithmetic():
    assert wedge(PhasePoint(2, 3), PhasePoint(5, 7)) == 2 * 7 - 3 * 5


def test_wedge_antisymmetric_bilinear_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x, y, z = rng.uniform(-1e3, 1e3, (3, 2))
        a, b = rng.uniform(-5, 5, 2)
        assert wedge(x, y) == pytest.approx(-wedge(y, x), abs=1e-9)
        assert wedge(a * x + b * y, z) == pytest.approx(
            a * wedge(x, z) + b * wedge(y, z), rel=1e-12, abs=1e-9)


def test_wedge_invariant_under_symplectic_maps():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = LinearSymplecticMap.random(rng, scale=2.0)
        x, y = rng.uniform(-1e3, 1e3, (2, 2))
        assert abs(wedge(m(x), m(y)) - wedge(x, y)) < 1e-10 * max(
            1.0, abs(wedge(x, y)))


def test_identity_map():
    x = PhasePoint(1.5, -0.5)
    assert LinearSymplecticMap.identity()(x) == x


def test_quarter_rotation():
    m = LinearSymplecticMap.rotation(np.pi / 2)
    y = m(PhasePoint(1, 0))
    # (p, q) = (1, 0) -> (0, 1) under the counterclockwise convention
    assert y.p == pytest.approx(0.0, abs=1e-15)
    assert abs(y.q) == pytest.approx(1.0)
    assert wedge(m(PhasePoint(1, 0)), m(PhasePoint(0, 1))) == pytest.approx(1.0)


def test_unit_determinant_shear():
    m = LinearSymplecticMap.shear_q(1.0)  # (p, q) -> (p, q + p)
    y = m(PhasePoint(1, 1))
    assert (y.p, y.q) == (1.0, 2.0)
    assert wedge(y, m(PhasePoint(0, 1))) == pytest.approx(
        wedge(PhasePoint(1, 1), PhasePoint(0, 1)))


def test_rejects_non_symplectic_matrix():
    with pytest.raises(ValueError, match="symplectic"):
        LinearSymplecticMap(np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_rejects_non_finite_point():
    with pytest.raises(ValueError):
        PhasePoint(np.nan, 0.0)


def test_compose_and_inverse():
    rng = np.random.default_rng(3)
    m = LinearSymplecticMap.random(rng)
    ident = m.compose(m.inverse()).m
    np.testing.assert_allclose(ident, np.eye(2), atol=1e-12)


def test_phase_grid_validation():
    with pytest.raises(ValueError):
        PhaseGrid(1.0, 0.0, -1.0, 1.0, 8, 8)
    with pytest.raises(ValueError):
        PhaseGrid(0.0, 1.0, -1.0, 1.0, 1, 8)
    g = PhaseGrid(-1.0, 1.0, -2.0, 2.0, 5, 9)
    assert g.points().shape == (9, 5, 2)
    assert g.q_axis[0] == -1.0 and g.p_axis[-1] == 2.0
