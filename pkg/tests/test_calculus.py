"""Symbolic Dunkl calculus against hand-derived values, plus the pointwise
layer, the drift audits, the generator decomposition, and the weighted
quadrature helpers."""

import math
from fractions import Fraction

import numpy as np
import pytest

from dunkl_lab import (ConditionError, DriftSpec, DunklContext,
                       GeneratorDecomposition, MultiPoly, build_standard,
                       eta_constant, integrate_gaussian_weighted,
                       integrate_weighted_1d, poly_from_string, probe_points,
                       weight_at)


def ctx_a1(k=Fraction(1, 4)):
    return DunklContext(build_standard("A", 1, k))


def rand_poly(n, rng, deg=4, n_terms=3):
    terms = {}
    for _ in range(n_terms):
        expts = tuple(int(e) for e in rng.integers(0, deg // 2 + 1, size=n))
        terms[expts] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 10)))
    p = MultiPoly(n, terms, "exact")
    return p if not p.is_zero() else MultiPoly.variable(0, n, "exact")


# -- rank-one hand values -------------------------------------------------------

def test_dunkl_operator_rank_one_hand_values():
    """T f = f' + k (f(x) - f(-x))/x in one dimension."""
    k = Fraction(1, 3)
    ctx = ctx_a1(k)
    x = MultiPoly.variable(0, 1)
    cases = [
        (x, MultiPoly.const(1, 1 + 2 * k)),            # odd: 1 + 2k
        (x * x, x.scale(2)),                           # even: plain derivative
        (x * x * x, (x * x).scale(3 + 2 * k)),
    ]
    for f, want in cases:
        assert ctx.dunkl_t(f, 0).equals(want)


def test_laplacian_of_squared_radius():
    # Delta_k |x|^2 = 2 n + 4 gamma on every system
    for fam, rank in [("A", 1), ("A", 2), ("B", 2), ("D", 4)]:
        ctx = DunklContext(build_standard(fam, rank, Fraction(1, 3)))
        r2 = MultiPoly.zero(ctx.n)
        for i in range(ctx.n):
            v = MultiPoly.variable(i, ctx.n)
            r2 = r2 + v * v
        want = MultiPoly.const(ctx.n, 2 * ctx.n + 4 * ctx.root.gamma)
        assert ctx.dunkl_laplacian(r2).equals(want)


def test_carre_du_champ_of_coordinate():
    # Gamma(x_1) = 1 + sum_a k_a a_1^2; on A_2 with k = 1/3 this is 5/3
    ctx = DunklContext(build_standard("A", 2, Fraction(1, 3)))
    f = poly_from_string("x1", 3)
    assert ctx.carre_du_champ(f).equals(MultiPoly.const(3, Fraction(5, 3)))


def test_difference_quotient_exact_division():
    ctx = DunklContext(build_standard("A", 2, Fraction(1, 3)))
    idx = next(i for i, a in enumerate(ctx.root.pos_roots_np)
               if np.allclose(a, [1.0, -1.0, 0.0]))
    f = poly_from_string("x1^2", 3)
    assert ctx.a_alpha(f, idx).equals(poly_from_string("x1 + x2", 3))


# -- identity families on random polynomials -------------------------------------

def test_identity_families_random_exact():
    rng = np.random.default_rng(21)
    for fam, rank in [("A", 1), ("A", 2), ("B", 2)]:
        ctx = DunklContext(build_standard(fam, rank, Fraction(2, 5)))
        n = ctx.n
        for _ in range(6):
            f, g = rand_poly(n, rng), rand_poly(n, rng)
            for i in range(n):
                for j in range(i + 1, n):
                    comm = ctx.dunkl_t(ctx.dunkl_t(f, j), i) \
                        - ctx.dunkl_t(ctx.dunkl_t(f, i), j)
                    assert comm.is_zero()
                defect = ctx.leibniz_defect(f, g, i) - ctx.leibniz_formula(f, g, i)
                assert defect.is_zero()
            lap = ctx.dunkl_laplacian(f, method="sum_of_squares") \
                - ctx.dunkl_laplacian(f, method="closed_form")
            assert lap.is_zero()
            cdc = ctx.carre_du_champ(f, method="definition") \
                - ctx.carre_du_champ(f, method="closed_form")
            assert cdc.is_zero()


def test_gamma_l_routes_agree():
    rng = np.random.default_rng(22)
    ctx = DunklContext(build_standard("A", 2, Fraction(1, 4)))
    drift = DriftSpec.linear(1)
    for _ in range(5):
        f = rand_poly(ctx.n, rng)
        diff = ctx.gamma_l(f, drift, method="definition") \
            - ctx.gamma_l(f, drift, method="closed_form")
        assert diff.is_zero()


# -- coercivity constant ----------------------------------------------------------

def test_eta_constant_exact_values():
    drift = DriftSpec.linear(1)
    assert eta_constant(drift, ctx_a1(Fraction(1, 4))) == Fraction(-1, 2)
    assert eta_constant(drift, ctx_a1(Fraction(1, 2))) == 0
    # eta = -c + 2 c gamma scales linearly in c
    assert eta_constant(DriftSpec.linear(2), ctx_a1(Fraction(1, 4))) == Fraction(-1)


def test_generator_hand_values_rank_one():
    k, c = Fraction(1, 4), 1
    ctx = ctx_a1(k)
    drift = DriftSpec.linear(c)
    x = MultiPoly.variable(0, 1)
    # L x = -c (1 + 2k) x and L x^2 = (2 + 4k) - 2 c x^2
    assert ctx.apply_generator(x, drift).equals(x.scale(-c * (1 + 2 * k)))
    want = MultiPoly.const(1, 2 + 4 * k) - (x * x).scale(2 * c)
    assert ctx.apply_generator(x * x, drift).equals(want)


# -- jump-diffusion decomposition -------------------------------------------------

def test_decomposition_residual_zero():
    rng = np.random.default_rng(23)
    for fam, rank in [("A", 1), ("A", 2), ("B", 2)]:
        ctx = DunklContext(build_standard(fam, rank, Fraction(1, 3)))
        dec = GeneratorDecomposition(ctx, DriftSpec.linear(1))
        for _ in range(4):
            assert dec.identity_residual(rand_poly(ctx.n, rng)).is_zero()


def test_drift_and_rates_hand_values():
    # A_1, k = 1/4, c = 1 at x = 2: mu = -2 + 2k/(2x)*2 = -1.75,
    # lambda = k (2/<a,x>^2 + c) = 0.25 (0.25 + 1) = 0.3125
    dec = GeneratorDecomposition(ctx_a1(), DriftSpec.linear(1))
    x = np.array([2.0])
    assert np.allclose(dec.mu_at(x), [-1.75], atol=1e-12)
    assert np.allclose(dec.rates_at(x), [0.3125], atol=1e-12)


def test_rates_nonnegative_for_linear_drift():
    ctx = DunklContext(build_standard("A", 2, Fraction(1, 2), scalar_mode="float"))
    dec = GeneratorDecomposition(ctx, DriftSpec.linear(1))
    pts = probe_points(ctx.root, n=4000, seed=2, near_hyperplane=True)
    assert dec.rates_nonnegative(pts).passed


def test_repulsive_drift_fails_rate_audit():
    ctx = ctx_a1()
    bounds = {"sup_partial_ii": 5.0, "sup_offdiag": 0.0, "sup_a_alpha": 5.0}
    repulsive = DriftSpec.custom(lambda x: 5.0 * x, bounds, name="repulsive")
    report = repulsive.audit_rate_condition(ctx)
    assert not report.passed
    with pytest.raises(ConditionError):
        repulsive.validate(ctx)


def test_shifted_drift_fails_equivariance_audit():
    ctx = ctx_a1()
    bounds = {"sup_partial_ii": 1.0, "sup_offdiag": 0.0, "sup_a_alpha": 1.0}
    shifted = DriftSpec.custom(lambda x: -x + 0.5, bounds, name="shifted")
    assert not shifted.audit_equivariance(ctx).passed


def test_odd_cubic_drift_passes_audits():
    ctx = ctx_a1()
    bounds = {"sup_partial_ii": 0.0, "sup_offdiag": 0.0, "sup_a_alpha": 0.0}
    cubic = DriftSpec.custom(lambda x: -x ** 3, bounds, name="cubic")
    assert cubic.audit_equivariance(ctx).passed
    assert cubic.audit_rate_condition(ctx).passed


# -- pointwise layer --------------------------------------------------------------

def test_numeric_gradient_matches_symbolic():
    ctx = DunklContext(build_standard("A", 2, Fraction(1, 3)))
    f = poly_from_string("x1^3 - 2*x2*x3 + x1", 3)
    grad = ctx.dunkl_gradient(f)
    pts = probe_points(ctx.root, n=10, radius=2.0, seed=3)

    def fc(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(f.eval_float([x[..., i] for i in range(3)]))

    for x in pts:
        want = np.array([g.eval_float(list(x)) for g in grad])
        got = ctx.dunkl_gradient_at(fc, x)
        assert np.allclose(got, want, atol=1e-5, rtol=1e-5)


def test_probe_points_deterministic_and_off_wall():
    root = build_standard("A", 2, 0.3, scalar_mode="float")
    a = probe_points(root, n=200, seed=42)
    b = probe_points(root, n=200, seed=42)
    assert np.array_equal(a, b)
    assert np.all(np.linalg.norm(a, axis=1) <= 20.0 + 1e-12)
    gaps = np.abs(a @ root.pos_roots_np.T)
    assert gaps.min() > 0.0


def test_weight_group_invariance():
    root = build_standard("B", 2, 0.4, scalar_mode="float")
    pts = probe_points(root, n=100, seed=5)
    w = weight_at(root, pts)
    for g in root.group_np:
        assert np.allclose(weight_at(root, pts @ g.T), w, rtol=1e-10)


# -- weighted quadrature ----------------------------------------------------------

def test_gaussian_weighted_second_moment_1d():
    # int x^2 dnu / int dnu = (2k + 1)/c for the rank-one weight |x|^{2k}
    root = build_standard("A", 1, Fraction(1, 4)).to_float()
    num = integrate_gaussian_weighted(root, lambda x: x[0] ** 2, 1.0)
    den = integrate_gaussian_weighted(root, lambda x: 1.0, 1.0)
    assert abs(num / den - 1.5) < 1e-8


def test_gaussian_weighted_second_moment_2d():
    # E |x|^2 = (n + 2 gamma)/c
    root = build_standard("B", 2, 0.3, scalar_mode="float")
    num = integrate_gaussian_weighted(root, lambda x: x[0] ** 2 + x[1] ** 2, 1.0)
    den = integrate_gaussian_weighted(root, lambda x: 1.0, 1.0)
    want = (2 + 2 * float(root.gamma)) / 1.0
    assert abs(num / den - want) < 1e-6 * want


def test_weighted_line_integral_consistent():
    root = build_standard("A", 1, Fraction(1, 4)).to_float()
    g = lambda t: t ** 2 * math.exp(-0.5 * t * t)
    a = integrate_weighted_1d(root, g)
    b = integrate_gaussian_weighted(root, lambda x: x[0] ** 2, 1.0)
    assert abs(a - b) < 1e-8 * max(1.0, abs(b))


def test_quadrature_requires_damping():
    root = build_standard("A", 1, Fraction(1, 4)).to_float()
    with pytest.raises(ValueError):
        integrate_gaussian_weighted(root, lambda x: 1.0, 0.0)
