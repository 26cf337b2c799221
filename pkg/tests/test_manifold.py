import numpy as np
import pytest

from chordal.errors import AmbiguousCausticError
from chordal.manifold import (Manifold1D, action_between, build_circle,
                              build_from_graph, build_line, ebk_check,
                              maslov_between, reparametrize)


def fig_curve(n=800):
    """Convex graph manifold p(q) = e^q - q on [-2, 2], arc-length labels."""
    return build_from_graph(lambda q: np.exp(q) - q, (-2.0, 2.0), n)


def test_graph_manifold_has_no_caustics():
    m = fig_curve()
    assert m.caustics == []
    assert np.all(m.maslov == 0)


def test_zero_momentum_graph_action():
    m = build_line(0.0, (0.0, 1.0), 64)
    assert np.max(np.abs(m.action)) < 1e-14


def test_unit_momentum_graph_action():
    m = build_line(1.0, (0.0, 1.0), 64)
    assert m.action[-1] == pytest.approx(1.0, abs=1e-12)


def test_graph_action_q_over_two():
    # p(q) = q integrates to q^2/2
    m = build_from_graph(lambda q: q, (0.0, 1.0), 256, param="q")
    assert action_between(m, 0.0, 1.0) == pytest.approx(0.5, abs=1e-10)


def test_rejects_nonfinite_profile():
    with pytest.raises(ValueError, match="not finite at q"):
        build_from_graph(lambda q: np.log(q), (-1.0, 1.0), 64)


def test_circle_loop_area_and_caustics():
    m = build_circle(1.0, n=2048)
    assert m.action[-1] == pytest.approx(np.pi, abs=1e-9)
    assert len(m.caustics) == 2
    m2 = build_circle(np.sqrt(0.2), n=2048)
    assert m2.action[-1] == pytest.approx(0.2 * np.pi, abs=1e-10)


def test_circle_orientation_flips_signs():
    m = build_circle(1.0, orientation=-1, n=1024)
    assert m.action[-1] == pytest.approx(-np.pi, abs=1e-9)
    assert sum(c.increment for c in m.caustics) == -2


def test_action_additivity():
    m = fig_curve()
    s0, s1, s2 = 0.3, 2.1, 4.4
    total = action_between(m, s0, s2)
    split = action_between(m, s0, s1) + action_between(m, s1, s2)
    assert total == pytest.approx(split, abs=1e-10)


def test_action_empty_path():
    m = fig_curve()
    assert action_between(m, 1.0, 1.0) == 0.0


def test_action_out_of_range_rejected():
    m = fig_curve()
    with pytest.raises(ValueError, match="outside"):
        action_between(m, -1.0, 2.0)


def test_maslov_graph_zero():
    m = fig_curve()
    assert maslov_between(m, 0.1, m.s_max - 0.1) == 0


def test_maslov_circle_full_and_half_loop():
    m = build_circle(1.0, n=1024)
    L = m.s_max
    assert maslov_between(m, 0.01 * L, 0.99 * L) == 2
    # independent oracle: count sign changes of dq/ds along a half loop
    s_half = np.linspace(0.01 * L, 0.51 * L, 4001)
    g = m.tangent(s_half)[:, 1]
    crossings = int(np.count_nonzero(np.diff(np.sign(g)) != 0))
    assert crossings == 1
    assert maslov_between(m, 0.01 * L, 0.51 * L) == 1
    # reversed traversal flips the sign
    assert maslov_between(m, 0.51 * L, 0.01 * L) == -1


def test_maslov_ambiguous_endpoint():
    m = build_circle(1.0, n=256)
    s_c = m.caustics[0].s
    with pytest.raises(AmbiguousCausticError):
        maslov_between(m, s_c, m.s_max - 0.01)


def test_ebk_quantized_circles():
    # pi r^2 = (n + 1/2) 2 pi hbar at hbar = 0.2 -> r^2 = 0.2 gives n = 0
    n, res = ebk_check(build_circle(np.sqrt(0.2), n=2048), hbar=0.2)
    assert n == 0 and abs(res) < 1e-10
    n, res = ebk_check(build_circle(np.sqrt(0.6), n=2048), hbar=0.2)
    assert n == 1 and abs(res) < 1e-10
    n, res = ebk_check(build_circle(1.0, n=2048), hbar=0.2)
    assert n == 2 and abs(res) < 1e-9


def test_ebk_rejects_open_manifold():
    with pytest.raises(ValueError, match="closed"):
        ebk_check(fig_curve(), hbar=0.2)


def test_reparametrize_identity():
    m = fig_curve(200)
    m2 = reparametrize(m, lambda s: s)
    np.testing.assert_allclose(m2.points, m.points)
    np.testing.assert_allclose(m2.amp, m.amp)


def test_reparametrize_scales_amplitude():
    m = fig_curve(200)
    m2 = reparametrize(m, lambda s: 2 * s)
    np.testing.assert_allclose(m2.amp, m.amp / np.sqrt(2), rtol=1e-9)


def test_reparametrize_preserves_density_norm():
    # open curve, smooth non-affine relabeling
    m = fig_curve(2000).normalized()
    m2 = reparametrize(m, lambda s: s + 0.02 * s ** 2)
    assert m2.density_norm() == pytest.approx(m.density_norm(), abs=1e-8)
    # closed curve: the relabeling must have a periodic derivative
    circ = build_circle(1.3, n=2000).normalized()
    L = circ.s_max
    warp = lambda s: s + 0.05 * L / (2 * np.pi) * np.sin(2 * np.pi * s / L)
    c2 = reparametrize(circ, warp)
    assert c2.density_norm() == pytest.approx(circ.density_norm(), abs=1e-8)


def test_reparametrize_rejects_non_monotone():
    m = fig_curve(200)
    with pytest.raises(ValueError, match="monotone"):
        reparametrize(m, lambda s: np.sin(3 * s))


def test_refinement_quadrature_order():
    # doubling the sampling should shrink the loop-action error ~ n^-2
    r = 0.9
    exact = np.pi * r * r

    def err(n):
        return abs(build_circle(r, n=n).action[-1] - exact)

    # trapezoid on a periodic integrand converges fast; use the graph
    m_err = [abs(action_between(build_from_graph(
        lambda q: np.sin(3 * q), (0.0, 2.0), n, param="q"), 0.0, 2.0)
        - (1 - np.cos(6.0)) / 3) for n in (64, 128, 256)]
    assert m_err[0] / m_err[1] > 3.0
    assert m_err[1] / m_err[2] > 3.0
    assert err(2048) < 1e-9


def test_csv_round_trip(tmp_path):
    m = build_circle(1.0, n=128, a_of_s=lambda s: np.exp(1j * 0.3) / (1 + s))
    path = tmp_path / "m.csv"
    m.to_csv(path)
    m2 = Manifold1D.from_csv(path)
    np.testing.assert_allclose(m2.points, m.points, atol=1e-15)
    np.testing.assert_allclose(m2.amp, m.amp, atol=1e-15)
    assert m2.closed == m.closed
    with open(path) as fh:
        assert fh.readline().strip() == "s,q,p,re_a,im_a,S,mu"
