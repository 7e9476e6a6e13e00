"""Acceptance gate: eleven end-to-end checks, one test per criterion.

Symbolic identities run in exact arithmetic and demand zero residual.
Monte Carlo comparisons state their tolerance as a multiple of the
estimator standard error, with seeds frozen so every run is reproducible
bit for bit.  Where a runtime budget applies it is asserted.

Run with `pytest tests/test_acceptance.py -v -s` for one line per
criterion plus the measured margins.
"""

import math
import time
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from dunkl_lab import (DriftSpec, DunklContext, GeneratorDecomposition,
                       MultiPoly, ParticleDynamics, SimConfig,
                       audit_interaction, build_default_model, build_standard,
                       cauchy_convergence_test, coordinate_observable,
                       decoupled_rate_1d, encode_site, ergodicity_test,
                       eta_constant, fill_window, finite_speed_test,
                       poly_from_string, probe_points, reflection_matrix,
                       simulate_coupled, simulate_window, tanh_observable,
                       verify_gradient_bound, verify_invariant_measure,
                       verify_lyapunov)


def rand_poly(n, rng, deg=6, n_terms=3):
    """Random rational-coefficient polynomial of total degree <= deg."""
    terms = {}
    for _ in range(n_terms):
        d = int(rng.integers(0, deg + 1))
        exps = np.bincount(rng.integers(0, n, size=d), minlength=n)
        num = int(rng.integers(-9, 10))
        terms[tuple(int(e) for e in exps)] = Fraction(num or 1,
                                                      int(rng.integers(1, 10)))
    p = MultiPoly(n, terms, "exact")
    return p if not p.is_zero() else MultiPoly.variable(0, n, "exact")


# Generating reflections per system; checking gradient equivariance on a
# generating set extends to the whole group by composing the identity.
SIMPLE_TARGETS = {
    ("A", 1): [[math.sqrt(2.0)]],
    ("A", 2): [[1, -1, 0], [0, 1, -1]],
    ("A", 3): [[1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1]],
    ("D", 4): [[1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1], [0, 0, 1, 1]],
}


def simple_reflections(ctx, fam, rank):
    pr = ctx.root.pos_roots_np
    sigmas = []
    for tgt in SIMPLE_TARGETS[(fam, rank)]:
        tgt = np.asarray(tgt, dtype=float)
        idx = next(i for i, r in enumerate(pr)
                   if np.allclose(r, tgt) or np.allclose(r, -tgt))
        sigmas.append(reflection_matrix(ctx.root.positive_roots[idx],
                                        ctx.mode))
    return sigmas


def check_identity_families(ctx, f, g2, i_star, sigmas):
    """All five exact families on one polynomial pair."""
    aq = ctx.a_alpha_all(f)
    grad = [ctx.dunkl_t(f, i, aq) for i in range(ctx.n)]
    aqs = [ctx.a_alpha_all(p) for p in grad]

    # commutativity for every coordinate pair
    for i in range(ctx.n):
        for j in range(i + 1, ctx.n):
            assert ctx.dunkl_t(grad[j], i, aqs[j]).equals(
                ctx.dunkl_t(grad[i], j, aqs[i]))

    # Laplacian: sum of squared operators vs the closed form
    sos = ctx.poly_zero()
    for i in range(ctx.n):
        sos = sos + ctx.dunkl_t(grad[i], i, aqs[i])
    assert sos.equals(ctx.dunkl_laplacian(f, "closed_form"))

    # product-rule defect vs its predicted form
    assert ctx.leibniz_defect(f, g2, i_star).equals(
        ctx.leibniz_formula(f, g2, i_star))

    # square field: definition vs closed form
    assert ctx.carre_du_champ(f, "definition").equals(
        ctx.carre_du_champ(f, "closed_form"))

    # gradient equivariance over the generating reflections
    for sig in sigmas:
        lhs = ctx.dunkl_gradient(f.compose_linear(sig))
        gs = [p.compose_linear(sig) for p in grad]
        for i in range(ctx.n):
            rhs = ctx.poly_zero()
            for j in range(ctx.n):
                rhs = rhs + gs[j].scale(sig[j][i])
            assert lhs[i].equals(rhs)


def test_criterion_01_exact_identity_suite():
    """Five operator identities, zero tolerance, 100 random polynomials."""
    t0 = time.time()
    rng = np.random.default_rng(11)
    # k is redrawn per polynomial where context construction is cheap; the
    # two large groups draw one k per run, their construction dominating
    plan = [("A", 1, 57, True), ("A", 2, 25, True),
            ("A", 3, 12, False), ("D", 4, 6, False)]
    ctx_cache = {}
    total = 0
    for fam, rank, count, k_per_poly in plan:
        k_run = Fraction(int(rng.integers(1, 5)), 4)
        for _ in range(count):
            k = Fraction(int(rng.integers(1, 5)), 4) if k_per_poly else k_run
            key = (fam, rank, k)
            if key not in ctx_cache:
                ctx = DunklContext(build_standard(fam, rank, k))
                ctx_cache[key] = (ctx, simple_reflections(ctx, fam, rank))
            ctx, sigmas = ctx_cache[key]
            f = rand_poly(ctx.n, rng)
            g2 = rand_poly(ctx.n, rng)
            i_star = int(rng.integers(0, ctx.n))
            check_identity_families(ctx, f, g2, i_star, sigmas)
            total += 1
    elapsed = time.time() - t0
    assert total == 100
    assert elapsed <= 5.0
    print(f"criterion 01 PASS: 5 identity families exact on {total} "
          f"rational polynomials across 4 systems ({elapsed:.2f}s)")


def test_criterion_02_generator_decomposition():
    """Diffusion + drift + reflection-jump split; nonnegative rates."""
    systems = [("A", 1, Fraction(1, 4)), ("A", 2, Fraction(1, 3)),
               ("A", 3, Fraction(2, 5)), ("B", 2, Fraction(1, 2)),
               ("D", 4, Fraction(1, 4))]
    drift = DriftSpec.linear(1)
    rng = np.random.default_rng(3)
    worst = math.inf
    for fam, rank, k in systems:
        ctx = DunklContext(build_standard(fam, rank, k))
        dec = GeneratorDecomposition(ctx, drift)
        for _ in range(4):
            f = rand_poly(ctx.n, rng, deg=5)
            assert dec.identity_residual(f).is_zero()
        pts = probe_points(ctx.root, n=10_000, seed=5, near_hyperplane=True)
        rep = dec.rates_nonnegative(pts)
        assert rep.passed
        worst = min(worst, rep.worst_value)
    print("criterion 02 PASS: decomposition residual exactly zero on 5 "
          f"systems; jump rates >= 0 at 10^4 probes each (min {worst:.3g})")


def test_criterion_03_contraction_constant():
    """eta = -c + 2 c gamma, exact rational arithmetic."""
    drift = DriftSpec.linear(1)
    quarter = DunklContext(build_standard("A", 1, Fraction(1, 4)))
    half = DunklContext(build_standard("A", 1, Fraction(1, 2)))
    assert eta_constant(drift, quarter) == Fraction(-1, 2)
    assert eta_constant(drift, half) == 0
    assert eta_constant(DriftSpec.linear(2), quarter) == -1
    print("criterion 03 PASS: eta(c=1, gamma=1/4) = -1/2, "
          "eta(c=1, gamma=1/2) = 0, eta(c=2, gamma=1/4) = -1, all exact")


def test_criterion_04_moment_relaxation():
    """First and second moment against the exact relaxation curves."""
    t0 = time.time()
    k, c, x0 = 0.25, 1.0, 1.0
    ctx = DunklContext(build_standard("A", 1, Fraction(1, 4)))
    dyn = ParticleDynamics(ctx, DriftSpec.linear(1))
    t_grid = [0.25, 0.5, 1.0, 2.0, 8.0]
    cfg = SimConfig(dt=1e-3, n_replicas=100_000, seed=14)
    states, flags = simulate_coupled(dyn, np.array([[x0]]), t_grid, cfg)
    good = ~flags
    n_good = int(good.sum())
    assert n_good >= 99_000

    # second-moment ODE m' = (2 + 4k) - 2 c m, plus a closed-form cross-check
    sol = solve_ivp(lambda t, m: [(2 + 4 * k) - 2 * c * m[0]],
                    (0.0, t_grid[-1]), [x0 ** 2], t_eval=t_grid,
                    rtol=1e-10, atol=1e-12)
    m2_ref = sol.y[0]
    m2_closed = 1.5 - 0.5 * np.exp(-2 * np.asarray(t_grid))
    assert float(np.max(np.abs(m2_ref - m2_closed))) < 1e-8

    worst_z = 0.0
    m2_last = None
    for j, (tv, st) in enumerate(zip(t_grid, states)):
        xs = st[0][good][:, 0]
        m1 = float(xs.mean())
        m1_se = float(xs.std(ddof=1) / math.sqrt(n_good))
        m1_ref = x0 * math.exp(-c * (1 + 2 * k) * tv)
        assert abs(m1 - m1_ref) <= 3.0 * m1_se
        sq = xs ** 2
        m2 = float(sq.mean())
        m2_se = float(sq.std(ddof=1) / math.sqrt(n_good))
        assert abs(m2 - m2_ref[j]) <= 3.0 * m2_se
        worst_z = max(worst_z, abs(m1 - m1_ref) / m1_se,
                      abs(m2 - m2_ref[j]) / m2_se)
        m2_last = m2
    stat_err = abs(m2_last - 1.5)
    assert stat_err <= 0.02 * 1.5
    print(f"criterion 04 PASS: E[X_t], E[X_t^2] within 3 SE at 5 times "
          f"(worst z {worst_z:.2f}); stationary second moment off by "
          f"{stat_err:.4f} <= 0.03 ({time.time() - t0:.0f}s)")


def test_criterion_05_invariant_measure():
    """Quadrature, long-run ensemble and time-average routes agree."""
    t0 = time.time()
    drift = DriftSpec.linear(1)

    ctx1 = DunklContext(build_standard("A", 1, Fraction(1, 4)))
    fs1 = [poly_from_string(s, 1) for s in ["x1", "x1^2", "x1^4"]]
    rows1 = verify_invariant_measure(ctx1, drift, fs1,
                                     SimConfig(dt=1e-3, n_replicas=8000,
                                               seed=22))

    ctx2 = DunklContext(build_standard("B", 2, 0.3, "float"))
    fs2 = [poly_from_string(s, 2, mode="float") for s in
           ["x1", "x2", "x1^2", "x2^2", "x1*x2",
            "x1^4 + 2*x1^2*x2^2 + x2^4"]]
    rows2 = verify_invariant_measure(ctx2, drift, fs2,
                                     SimConfig(dt=1e-3, n_replicas=5000,
                                               seed=22))

    for rows, n_f in [(rows1, 3), (rows2, 6)]:
        assert len(rows) == 3 * n_f
        assert sum(r.route.startswith("quadrature") for r in rows) == n_f
        for r in rows:
            assert r.passed
    print(f"criterion 05 PASS: all {len(rows1) + len(rows2)} rows passed "
          f"(quadrature <= 1e-6 scale, moments within 3 SE) on the line and "
          f"the plane ({time.time() - t0:.0f}s)")


def test_criterion_06_gradient_bound():
    """Symmetrised square field of P_t f under the e^{2 eta t} envelope."""
    t0 = time.time()
    combos = [("A", 1, Fraction(1, 4)), ("A", 1, Fraction(2, 5)),
              ("A", 2, Fraction(1, 12)), ("A", 2, Fraction(2, 15))]
    drift = DriftSpec.linear(1)
    cfg = SimConfig(dt=2e-3, n_replicas=2000, seed=16)
    t_list = [0.0, 0.25, 0.5, 1.0]
    n_rows = 0
    for fam, rank, k in combos:
        ctx = DunklContext(build_standard(fam, rank, k))
        gamma = ctx.root.gamma
        assert gamma in (Fraction(1, 4), Fraction(2, 5))
        probes = probe_points(ctx.root, n=2, radius=3.0, seed=7)

        def tanh_f(pts):
            return np.tanh(np.asarray(pts)[..., 0])

        def tanh_grad(pts):
            g = np.zeros_like(np.asarray(pts, dtype=float))
            g[..., 0] = 1.0 / np.cosh(np.asarray(pts)[..., 0]) ** 2
            return g

        for f, grad_f in [(poly_from_string("x1", ctx.n), None),
                          (tanh_f, tanh_grad)]:
            rows = verify_gradient_bound(ctx, drift, f, probes, t_list, cfg,
                                         grad_f=grad_f)
            for r in rows:
                assert r.eta == float(-1 + 2 * gamma)
                if r.t == 0.0:
                    # both sides evaluate pointwise; margin is pure
                    # finite-difference truncation
                    assert abs(r.margin) <= 1e-4 * (1.0 + abs(r.rhs))
                else:
                    assert r.passed
                n_rows += 1
    assert n_rows == 4 * 2 * 2 * len(t_list)
    print(f"criterion 06 PASS: envelope holds at {n_rows} rows "
          f"(2 systems x 2 gammas x 2 observables x 2 probes x 4 times) "
          f"({time.time() - t0:.0f}s)")


def test_criterion_07_lyapunov_bound():
    """Radial drift condition on [0, 50] and the uniform moment bound."""
    t0 = time.time()
    ctx = DunklContext(build_standard("B", 2, 0.3, "float"))
    rep = verify_lyapunov(ctx, DriftSpec.linear(1), [2.0, 1.0],
                          [1.0, 2.0, 3.0, 4.0, 5.0],
                          SimConfig(dt=1e-3, n_replicas=10_000, seed=2))
    assert rep.drift_coercive
    assert rep.pointwise_ok
    assert rep.c1 > 0 and rep.c2 == 0.5
    assert len(rep.rows) == 5
    assert rep.passed
    print(f"criterion 07 PASS: L rho <= {rep.c1:.3f} - {rep.c2} rho on the "
          f"radial grid [0, 50]; E[rho(X_t)] under the bound at 5 times "
          f"({time.time() - t0:.0f}s)")


def test_criterion_08_lattice_decoupling_and_audits():
    """Interaction off: sitewise bit-identity.  Model audits exact."""
    t0 = time.time()
    spec = build_default_model(eps0=0.0, box_radius=3)
    win = fill_window(spec, fill=0.3, overrides={(0,): [1.2], (2,): [-0.7]})
    t_grid = [0.25, 0.5]
    cfg = SimConfig(dt=1e-3, n_replicas=2000, seed=9)
    states, flags = simulate_window(spec, win, t_grid, cfg)
    assert not flags.any()
    dyn = ParticleDynamics(spec.ctx, spec.site_drift)
    for s_idx, site in enumerate(spec.window_sites):
        single, sflags = simulate_coupled(dyn, win[s_idx:s_idx + 1], t_grid,
                                          cfg, stream_tag=encode_site(site))
        assert not sflags.any()
        for chk in range(len(t_grid)):
            assert np.array_equal(states[chk][0][:, s_idx, :],
                                  single[chk][0])

    audit = audit_interaction(build_default_model(), n_probes=2000, seed=0)
    assert audit.stencil_max == 0.0
    assert audit.equivariance_max <= 1e-12
    assert audit.passed
    print(f"criterion 08 PASS: {len(spec.window_sites)} sites bit-identical "
          f"to single-site runs at 2 checkpoints; stencil audit exactly 0, "
          f"equivariance <= 1e-12 ({time.time() - t0:.0f}s)")


def test_criterion_09_finite_speed_front():
    """Information front collapses along the certified envelope."""
    t0 = time.time()
    spec = build_default_model()
    rep = finite_speed_test(spec, tanh_observable(), [(1,), (3,), (5,)], 0.5,
                            SimConfig(dt=1e-3, n_replicas=12_000, seed=9),
                            h=0.1, n_probes=2)
    elapsed = time.time() - t0
    assert [r.n_l for r in rep.rows] == [1, 2, 3]
    assert rep.strictly_decreasing
    assert rep.ratio_ok
    assert rep.below_envelope
    assert rep.passed
    assert elapsed <= 600.0
    vals = ", ".join(f"{r.gamma_est:.2e}" for r in rep.rows)
    print(f"criterion 09 PASS: front profile [{vals}] strictly decreasing, "
          f"ratio {rep.fitted_ratio:.2e} < 1, below envelope "
          f"(sigma {rep.sigma:.3f}) ({elapsed:.0f}s <= 600s)")


def test_criterion_10_cauchy_truncation():
    """Nested-box differences collapse; exactly zero with coupling off."""
    t0 = time.time()
    spec = build_default_model(eps0=0.9, delta=0.25, box_radius=8)
    rep = cauchy_convergence_test(spec, tanh_observable(), 1.0, [2, 4, 6, 8],
                                  SimConfig(dt=1e-3, n_replicas=4000,
                                            seed=10), n_probes=2)
    assert rep.decreasing
    assert rep.slope_ok
    assert rep.slope + 3.0 * rep.slope_se <= 0.0
    assert rep.verdict == "pass"

    spec0 = build_default_model(eps0=0.0, box_radius=8)
    rep0 = cauchy_convergence_test(spec0, tanh_observable(), 1.0, [2, 4, 6, 8],
                                   SimConfig(dt=1e-3, n_replicas=400,
                                             seed=10), n_probes=2)
    assert rep0.verdict == "decoupled-exact"
    assert rep0.all_exact_zero
    for row in rep0.rows:
        assert row.d_n == 0.0
    print(f"criterion 10 PASS: log-slope {rep.slope:.2f} +- "
          f"{rep.slope_se:.2f} (3 SE below 0); decoupled differences "
          f"exactly zero ({time.time() - t0:.0f}s)")


def test_criterion_11_ergodic_coalescence():
    """Coupled configurations coalesce; decoupled rate matches -c(1+2k)."""
    t0 = time.time()
    t_grid = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0]

    spec_d = build_default_model(eps0=0.0, box_radius=0)
    assert decoupled_rate_1d(spec_d) == -1.5
    om = fill_window(spec_d, fill=0.2, overrides={(0,): [1.0]})
    omp = fill_window(spec_d, fill=0.2)
    rep_d = ergodicity_test(spec_d, coordinate_observable(), om, omp, t_grid,
                            SimConfig(dt=1e-3, n_replicas=10_000, seed=4))
    assert rep_d.passed
    rel = abs(rep_d.rate - (-1.5)) / 1.5
    assert rel <= 0.10

    spec_c = build_default_model()
    om_c = fill_window(spec_c, fill=0.2, overrides={(0,): [1.0]})
    omp_c = fill_window(spec_c, fill=0.2)
    rep_c = ergodicity_test(spec_c, coordinate_observable(), om_c, omp_c,
                            t_grid, SimConfig(dt=1e-3, n_replicas=3000,
                                              seed=17))
    assert rep_c.ergodic_mode
    assert rep_c.rate + 3.0 * rep_c.rate_se < 0.0
    assert rep_c.passed

    rep_i = ergodicity_test(spec_c, coordinate_observable(), om_c,
                            om_c.copy(), [0.25, 0.5],
                            SimConfig(dt=2e-3, n_replicas=300, seed=12))
    assert rep_i.identical
    for _, delta, _ in rep_i.rows:
        assert delta == 0.0
    print(f"criterion 11 PASS: decoupled rate {rep_d.rate:.3f} within "
          f"{100 * rel:.1f}% of -1.5; coupled rate {rep_c.rate:.3f} +- "
          f"{rep_c.rate_se:.3f} negative at 3 SE; identical start exactly "
          f"glued ({time.time() - t0:.0f}s)")
