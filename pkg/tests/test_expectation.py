import numpy as np
import pytest

from chordal.dynamics import harmonic_oscillator, propagate_manifold, standard_map
from chordal.expectation import (ExpectationReport, expectation_classical,
                                 expectation_semiclassical, expectation_twa)
from chordal.manifold import Manifold1D, build_circle, build_line
from chordal.observables import (Observable, gaussian_observable, obs_q,
                                 obs_q2)
from chordal.quantum import (GridSpec, build_maslov_state, expectation_exact,
                             propagate_exact)

HBAR = 0.05


def gauss_amp(center=0.0, sigma=0.5):
    return lambda s: np.exp(-(s - center) ** 2 / (4 * sigma ** 2)) \
        / (2 * np.pi * sigma ** 2) ** 0.25


def test_classical_normalization_and_symmetry():
    m = build_circle(1.0, n=1024).normalized()
    one = Observable("one", lambda p, q: np.ones_like(q), 1.0,
                     (-2, 2, -2, 2))
    assert expectation_classical(m, one) == pytest.approx(1.0, abs=1e-8)
    assert expectation_classical(m, obs_q()) == pytest.approx(0.0, abs=1e-10)
    # <q^2> over the uniform unit circle is 1/2
    assert expectation_classical(m, obs_q2()) == pytest.approx(0.5, abs=1e-6)


def test_twa_matches_classical_at_zero_time():
    m = build_line(0.0, (-2.0, 2.0), 512, a_of_s=gauss_amp()).normalized()
    rng = np.random.default_rng(42)
    res = expectation_twa(m, harmonic_oscillator(), 0.0, obs_q2(), 20000,
                          rng=rng)
    ref = expectation_classical(m, obs_q2())
    assert abs(res.mean - ref) < 3 * res.stderr


def test_twa_quadratic_flow_first_moment():
    # exact <q>(t) for transported line density under the harmonic flow
    m = build_line(0.0, (-1.5, 2.5), 512,
                   a_of_s=gauss_amp(center=0.5)).normalized()
    rng = np.random.default_rng(7)
    t = 1.1
    res = expectation_twa(m, harmonic_oscillator(), t, obs_q(), 40000,
                          rng=rng, dt=1e-3)
    q_mean0 = expectation_classical(m, obs_q())
    expect = q_mean0 * np.cos(t)
    assert abs(res.mean - expect) < max(3 * res.stderr, 2e-4)


def test_twa_unit_observable_exact():
    m = build_line(0.0, (-2.0, 2.0), 256, a_of_s=gauss_amp()).normalized()
    one = Observable("one", lambda p, q: np.ones_like(q), 1.0,
                     (-9, 9, -9, 9))
    res = expectation_twa(m, harmonic_oscillator(), 0.5, one, 2000,
                          rng=np.random.default_rng(1), dt=1e-2)
    assert res.mean == pytest.approx(1.0, abs=1e-12)
    assert res.stderr == pytest.approx(0.0, abs=1e-12)


def test_twa_agrees_with_transported_classical():
    # the acceptance identity at desk scale: TWA sampling vs quadrature
    # on the propagated curve
    m = build_line(0.2, (-1.5, 1.5), 1024, a_of_s=gauss_amp()).normalized()
    sys = standard_map(1.5)
    obs = gaussian_observable(p_center=0.5, q_center=1.0,
                              sigma_p=1.0, sigma_q=1.0)
    t = 3
    res = expectation_twa(m, sys, t, obs, 100_000,
                          rng=np.random.default_rng(3))
    mt = propagate_manifold(m, sys, t)
    ref = expectation_classical(mt, obs)
    assert abs(res.mean - ref) < 3 * res.stderr


def test_report_total_identity():
    rep = ExpectationReport(t=0.0, classical=0.4,
                            interference=[(0, 0.01 + 0.02j, "quadrature"),
                                          (1, -0.005 + 0.0j, "airy")])
    assert rep.total == pytest.approx(0.4 + 2 * (0.01 - 0.005))
    d = rep.to_dict()
    assert d["total"] == rep.total
    assert len(d["interference_terms"]) == 2


def test_harmonic_scenario_no_interference():
    m = build_line(0.0, (-1.5, 2.5), 600,
                   a_of_s=gauss_amp(center=0.5)).normalized()
    rep = expectation_semiclassical(
        m, harmonic_oscillator(), np.pi / 3, obs_q(), HBAR, dt=1e-3)
    assert rep.interference == []
    assert rep.total == rep.classical


def test_fold_state_interference_matches_exact():
    """End-to-end phase validation on a static fold.

    The two flattened sheets of q = q0 - c p^2 interfere; the pair
    correction must reproduce the exact quantum expectation value far
    better than the classical term alone, with the right sign.
    """
    c, q0, half = 60.0, 0.5, 0.3
    s = np.linspace(-half, half, 4001)
    pts = np.column_stack([s, q0 - c * s ** 2])
    taper = np.clip((half - np.abs(s)) / (0.2 * half), 0, 1)
    amp = (3 - 2 * taper) * taper ** 2
    m = Manifold1D(s, pts, amp.astype(complex)).normalized()

    obs = gaussian_observable(p_center=0.0, q_center=-0.1,
                              sigma_p=2.0, sigma_q=0.15)
    # exact reference from the synthesized state
    spec = GridSpec(-9.0, 3.0, 4096, HBAR)
    st = build_maslov_state(m, HBAR, spec)
    exact = expectation_exact(st, obs)

    zero = harmonic_oscillator()
    rep = expectation_semiclassical(m, zero, 0.0, obs, HBAR)
    assert len(rep.interference) == 1
    err_classical = abs(exact - rep.classical)
    err_total = abs(exact - rep.total)
    # the interference term is a genuine correction, not noise
    assert abs(rep.interference_sum) > 5 * err_total
    assert err_total < 0.2 * err_classical
