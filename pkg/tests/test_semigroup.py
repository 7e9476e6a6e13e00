"""Jump-diffusion sampler for the finite-dimensional semigroup: moment
closed forms in rank one, bitwise determinism of the coupled streams, and the
three statistical verifiers at unit scale."""

import math
from fractions import Fraction

import numpy as np
import pytest

from dunkl_lab import (ConditionError, DriftSpec, DunklContext, MultiPoly,
                       ParticleDynamics, SimConfig, build_standard,
                       encode_site, estimate_pt, estimate_symmetrised_gradient_pt,
                       poly_from_string, simulate_coupled, stream_for,
                       verify_gradient_bound, verify_invariant_measure,
                       verify_lyapunov)
from dunkl_lab.semigroup import LyapunovSpec, chi, chi_derivatives

A1 = DunklContext(build_standard("A", 1, Fraction(1, 4)))
LINEAR = DriftSpec.linear(1)


def test_site_encoding_and_streams():
    tags = {encode_site(s) for s in [(-2,), (-1,), (0,), (1,), (2,), (0, 1), (1, 0)]}
    assert len(tags) == 7
    a = stream_for(3, tags.pop()).standard_normal(4)
    b = stream_for(3, encode_site((5,))).standard_normal(4)
    assert not np.array_equal(a, b)
    c = stream_for(3, encode_site((5,))).standard_normal(4)
    assert np.array_equal(b, c)


def test_unit_observable_is_exactly_conserved():
    est = estimate_pt(A1, LINEAR, MultiPoly.const(1, 1), [1.0], 0.5,
                      SimConfig(n_replicas=300, seed=3))
    assert est.mean == 1.0
    assert est.std_error == 0.0


def test_estimates_are_bitwise_deterministic():
    cfg = SimConfig(n_replicas=500, seed=11)
    f = poly_from_string("x1^2", 1)
    a = estimate_pt(A1, LINEAR, f, [1.0], 0.5, cfg)
    b = estimate_pt(A1, LINEAR, f, [1.0], 0.5, cfg)
    assert a.mean == b.mean and a.std_error == b.std_error


def test_identical_coupled_rows_stay_glued():
    dyn = ParticleDynamics(A1, LINEAR)
    x0 = np.array([[1.0], [1.0], [0.5]])
    states, flags = simulate_coupled(dyn, x0, [0.25, 0.5], SimConfig(n_replicas=400, seed=7))
    for st in states:
        assert np.array_equal(st[0], st[1])
        assert not np.array_equal(st[0], st[2])


def test_coordinate_moment_closed_form():
    # E[X_t] = x0 exp(-c (1 + 2k) t) since x is an eigenfunction of L
    cfg = SimConfig(dt=1e-3, n_replicas=20_000, seed=5)
    t = 0.5
    est = estimate_pt(A1, LINEAR, poly_from_string("x1", 1), [1.0], t, cfg)
    want = math.exp(-1.5 * t)
    assert abs(est.mean - want) <= 3 * est.std_error
    assert est.std_error < 0.02


def test_second_moment_closed_form():
    # m' = (2 + 4k) - 2 c m gives m(t) = 1.5 + (x0^2 - 1.5) exp(-2 t)
    cfg = SimConfig(dt=1e-3, n_replicas=20_000, seed=6)
    t = 0.5
    est = estimate_pt(A1, LINEAR, poly_from_string("x1^2", 1), [2.0], t, cfg)
    want = 1.5 + (4.0 - 1.5) * math.exp(-2 * t)
    assert abs(est.mean - want) <= 3 * est.std_error


def test_k_zero_reduces_to_ornstein_uhlenbeck():
    ctx = DunklContext(build_standard("A", 1, Fraction(0)))
    cfg = SimConfig(dt=1e-3, n_replicas=20_000, seed=8)
    t = 0.4
    m1 = estimate_pt(ctx, LINEAR, poly_from_string("x1", 1), [1.0], t, cfg)
    m2 = estimate_pt(ctx, LINEAR, poly_from_string("x1^2", 1), [1.0], t, cfg)
    assert abs(m1.mean - math.exp(-t)) <= 3 * m1.std_error
    # variance (1 - e^{-2ct})/c for generator d^2/dx^2 - c x d/dx
    want2 = math.exp(-2 * t) + (1 - math.exp(-2 * t))
    assert abs(m2.mean - want2) <= 3 * m2.std_error


def test_bounded_observable_respects_sup_norm():
    est = estimate_pt(A1, LINEAR, lambda x: np.tanh(x[..., 0]), [2.0], 1.0,
                      SimConfig(n_replicas=2000, seed=9))
    assert abs(est.mean) <= 1.0


def test_wall_adjacent_initial_state_rejected():
    with pytest.raises(ValueError):
        estimate_pt(A1, LINEAR, poly_from_string("x1", 1), [1e-12], 0.1,
                    SimConfig(n_replicas=10, seed=1))


def test_negative_rate_aborts_simulation():
    bounds = {"sup_partial_ii": 5.0, "sup_offdiag": 0.0, "sup_a_alpha": 5.0}
    repulsive = DriftSpec.custom(lambda x: 5.0 * x, bounds, name="repulsive")
    dyn = ParticleDynamics(A1, repulsive)
    with pytest.raises(ConditionError):
        simulate_coupled(dyn, np.array([[1.0]]), [0.5],
                         SimConfig(n_replicas=50, seed=2))


# -- cutoff profile ---------------------------------------------------------------

def test_chi_cutoff_profile():
    assert chi(0.5) == 0.0 and chi(1.0) == 0.0
    assert chi(2.0) == 1.0 and chi(5.0) == 1.0
    mid = float(chi(1.5))
    assert 0.0 < mid < 1.0


def test_chi_derivatives_match_finite_differences():
    h = 1e-5
    for t in (1.2, 1.5, 1.8):
        c, c1, c2 = chi_derivatives(t)
        fd1 = (chi(t + h) - chi(t - h)) / (2 * h)
        fd2 = (chi(t + h) - 2 * chi(t) + chi(t - h)) / h ** 2
        assert abs(float(c) - float(chi(t))) < 1e-14
        assert abs(float(c1) - float(fd1)) < 1e-6
        assert abs(float(c2) - float(fd2)) < 1e-4


def test_lyapunov_radial_closed_form_outside_cutoff():
    # rho = r for r >= 2, so L rho = (n + 2 gamma - 1)/r - c r there
    spec = LyapunovSpec(2, 1.2, 0.5)
    for r in (2.5, 5.0, 10.0, 40.0):
        want = (2 + 2.4 - 1.0) / r - 1.0 * r
        got = float(spec.generator_radial(np.array([r]), 1.0)[0])
        assert abs(got - want) < 1e-12
    assert float(spec.generator_radial(np.array([0.5]), 1.0)[0]) == 0.0


def test_lyapunov_fit_dominates_grid():
    spec = LyapunovSpec(1, 0.25, 0.5)
    r = np.linspace(0.0, 50.0, 2001)
    c1 = spec.fit_c1(r, 1.0)
    assert np.all(spec.generator_radial(r, 1.0) <= c1 - 0.5 * spec.rho_radial(r) + 1e-12)


# -- statistical verifiers at unit scale -------------------------------------------

def test_verify_lyapunov_small_run():
    rep = verify_lyapunov(A1, LINEAR, [2.0], [1.0, 2.0],
                          SimConfig(dt=2e-3, n_replicas=2000, seed=12))
    assert rep.pointwise_ok
    assert rep.passed
    for t, mean, se, bound, ok in rep.rows:
        assert ok and mean <= bound


def test_verify_invariant_measure_small_run():
    fs = [poly_from_string(s, 1) for s in ("x1", "x1^2")]
    rows = verify_invariant_measure(A1, LINEAR, fs,
                                    SimConfig(dt=2e-3, n_replicas=2000, seed=13),
                                    t_long=6.0, burn_in=2.0)
    routes = {r.route for r in rows}
    assert any("quadrature" in r for r in routes)
    assert all(r.passed for r in rows)


def test_verify_gradient_bound_small_run():
    rows = verify_gradient_bound(A1, LINEAR, poly_from_string("x1", 1),
                                 np.array([[1.5]]), [0.0, 0.5],
                                 SimConfig(dt=2e-3, n_replicas=2000, seed=14))
    for r in rows:
        if r.t == 0.0:
            # both sides are the same finite-difference evaluation at t = 0
            assert abs(r.margin) <= 1e-4 * (1.0 + abs(r.rhs))
        else:
            assert r.passed
            assert r.eta == -0.5


def test_symmetrised_gradient_estimate_at_time_zero():
    f = poly_from_string("x1^3", 1)
    x = np.array([1.2])
    out = estimate_symmetrised_gradient_pt(A1, LINEAR, f, x, 0.0,
                                           SimConfig(n_replicas=200, seed=15))
    want = float(A1.symmetrised_gradient_poly(f, x[None, :])[0])
    assert out["std_error"] == 0.0 or out["std_error"] < 1e-10
    assert abs(out["estimate"] - want) <= 1e-3 * (1.0 + abs(want))
