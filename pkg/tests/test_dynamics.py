import numpy as np
import pytest

from chordal.dynamics import (estimate_tsc, flow, harmonic_oscillator,
                              propagate_manifold, quartic_oscillator,
                              standard_map, tangent_map)
from chordal.errors import EscapeError
from chordal.manifold import build_circle, build_line


def test_harmonic_quarter_rotation():
    sys = harmonic_oscillator()
    x = flow(sys, [0.0, 1.0], np.pi / 2, dt=1e-3)
    np.testing.assert_allclose(x, [-1.0, 0.0], atol=1e-6)


def test_zero_time_is_identity():
    for sys in (harmonic_oscillator(), standard_map(2.0)):
        x0 = np.array([0.37, -1.2])
        np.testing.assert_array_equal(flow(sys, x0, 0), x0)


def test_standard_map_single_kick():
    sys = standard_map(2.0)
    x = flow(sys, [0.3, 1.0], 1)
    p_expect = 0.3 + 2.0 * np.sin(1.0)
    assert x[0] == pytest.approx(p_expect, abs=1e-14)
    assert x[1] == pytest.approx(1.0 + p_expect, abs=1e-14)


def test_standard_map_rejects_fractional_time():
    with pytest.raises(ValueError, match="integer"):
        flow(standard_map(1.0), [0.0, 0.0], 0.5)


def test_tangent_map_identity_cases():
    sys = harmonic_oscillator()
    np.testing.assert_allclose(tangent_map(sys, [0.2, 0.4], 0.0), np.eye(2))
    m = tangent_map(sys, [0.0, 1.0], 2 * np.pi, dt=5e-4)
    np.testing.assert_allclose(m, np.eye(2), atol=1e-6)


def test_tangent_map_symplectic_along_random_trajectories():
    rng = np.random.default_rng(5)
    for sys in (quartic_oscillator(), standard_map(1.7)):
        for _ in range(10):
            x = rng.uniform(-1, 1, 2)
            t = 5 if sys.kind == "kicked-map" else rng.uniform(0.5, 3.0)
            m = tangent_map(sys, x, t, dt=1e-3)
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            assert det == pytest.approx(1.0, abs=1e-8)


def test_standard_map_stretches():
    m = tangent_map(standard_map(2.0), [0.3, 1.0], 10)
    assert np.log(np.linalg.norm(m, 2)) / 10 > 0.0


def test_energy_drift_bounded():
    # default step, longest configured run
    sys = quartic_oscillator()
    x0 = np.array([[0.0, 1.3], [0.6, -0.4]])
    e0 = sys.energy(x0)
    xt = flow(sys, x0, 4 * np.pi)
    drift = np.abs(sys.energy(xt) - e0) / np.abs(e0)
    assert np.max(drift) < 1e-6


def test_escape_is_flagged():
    sys = harmonic_oscillator()
    with pytest.raises(EscapeError):
        flow(sys, [0.0, 1.0], 1.0, dt=1e-3, escape_box=(-0.5, 0.5, -0.5, 0.5))


def test_propagate_circle_is_invariant():
    sys = harmonic_oscillator()
    m0 = build_circle(1.0, n=512)
    mt = propagate_manifold(m0, sys, 1.234, dt=1e-3)
    assert mt.action[-1] == pytest.approx(np.pi, abs=1e-6)
    radii = np.hypot(mt.points[:, 0], mt.points[:, 1])
    np.testing.assert_allclose(radii, 1.0, atol=1e-6)
    assert len(mt.caustics) == 2


def test_propagate_zero_time_identity():
    m0 = build_line(0.3, (-1.0, 1.0), 64)
    mt = propagate_manifold(m0, harmonic_oscillator(), 0.0)
    np.testing.assert_allclose(mt.points, m0.points, atol=1e-14)


def test_propagate_line_quarter_rotation():
    m0 = build_line(0.0, (-1.0, 1.0), 128)
    mt = propagate_manifold(m0, harmonic_oscillator(), np.pi / 2, dt=1e-3)
    np.testing.assert_allclose(mt.points[:, 1], 0.0, atol=1e-6)  # q = 0
    assert mt.points[:, 0].min() == pytest.approx(-1.0, abs=1e-6)
    assert mt.points[:, 0].max() == pytest.approx(1.0, abs=1e-6)


def test_propagate_conserves_density_norm_exactly():
    m0 = build_line(0.0, (-1.0, 1.0), 128,
                    a_of_s=lambda s: np.exp(-s ** 2))
    mt = propagate_manifold(m0, standard_map(1.5), 3)
    # amplitudes ride along with their labels
    np.testing.assert_allclose(mt.amplitude(m0.s), m0.amp, atol=1e-12)


def test_propagate_refines_stretched_curves():
    m0 = build_line(0.0, (0.5, 1.5), 64, a_of_s=lambda s: 1.0)
    mt = propagate_manifold(m0, standard_map(2.5), 6, max_spacing=0.05)
    gaps = np.hypot(*np.diff(mt.points, axis=0).T)
    assert gaps.max() <= 0.05 + 1e-12
    assert len(mt.s) > len(m0.s)


def test_estimate_tsc_values():
    assert estimate_tsc(1.0, 1.0, 1.0, 1.0, 0.01) == pytest.approx(
        np.log(100.0), rel=1e-12)
    assert estimate_tsc(1.0, 1.0, 1.0, 1.0, 1.0) == 0.0
    assert estimate_tsc(0.5, 4.0, 0.5, 1.0, 0.02) == pytest.approx(
        2 * np.log(100.0), rel=1e-12)
    with pytest.raises(ValueError):
        estimate_tsc(1.0, -1.0, 1.0, 1.0, 0.1)
