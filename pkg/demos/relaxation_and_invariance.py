"""One-particle engine tour: Monte Carlo semigroup estimates against closed
forms, the symmetrised gradient bound, and the invariant-measure routes.

Scales are kept small; expect roughly a minute of runtime and 2-sigma-level
agreement rather than the tighter acceptance tolerances.
"""

import math
from fractions import Fraction

from dunkl_lab import (DriftSpec, DunklContext, SimConfig, build_standard,
                       estimate_pt, eta_constant, poly_from_string,
                       probe_points, verify_gradient_bound,
                       verify_invariant_measure, verify_lyapunov)


def main():
    k = Fraction(1, 4)
    ctx = DunklContext(build_standard("A", 1, k))
    drift = DriftSpec.linear(1)
    x = poly_from_string("x1", 1)
    x2 = poly_from_string("x1^2", 1)
    cfg = SimConfig(dt=1e-3, n_replicas=20_000, seed=1)

    print("relaxation of the first two moments from x0 = 1.5")
    t_grid = [0.25, 0.5, 1.0, 2.0]
    ests_1 = estimate_pt(ctx, drift, x, [1.5], t_grid, cfg)
    ests_2 = estimate_pt(ctx, drift, x2, [1.5], t_grid, cfg)
    for e1, e2 in zip(ests_1, ests_2):
        m1 = 1.5 * math.exp(-1.5 * e1.t)
        m2 = 1.5 + (1.5 ** 2 - 1.5) * math.exp(-2 * e2.t)
        print(f"  t={e1.t:4.2f}  E[X_t]  = {e1.mean:+.4f} +- {e1.std_error:.4f}"
              f"  (exact {m1:+.4f})   E[X_t^2] = {e2.mean:.4f} +- "
              f"{e2.std_error:.4f}  (exact {m2:.4f})")

    eta = eta_constant(drift, ctx)
    print(f"\ngradient bound with eta = {eta} (decay factor e^(2 eta t))")
    probes = probe_points(ctx.root, n=2, radius=2.0, seed=3)
    rows = verify_gradient_bound(ctx, drift, x, probes, [0.5, 1.0],
                                 SimConfig(dt=2e-3, n_replicas=4000, seed=5),
                                 h=0.05)
    for r in rows:
        print(f"  t={r.t:4.2f} x={r.x[0]:+.3f}  Gamma~(P_t f) = {r.lhs:.4f}"
              f"  envelope = {r.rhs:.4f}  margin {r.margin:+.4f}"
              f"  ok={r.passed}")

    print("\ninvariant measure: quadrature, long-run and time-average routes")
    rows = verify_invariant_measure(ctx, drift, [x, x2],
                                    SimConfig(dt=2e-3, n_replicas=3000,
                                              seed=7))
    for r in rows:
        print(f"  {r.f_name:10s} {r.route:26s} value {r.value:+.4f} "
              f"(reference {r.reference:+.4f})  ok={r.passed}")

    print("\nLyapunov control of rho(x) = |x| chi(|x|), chi a smooth cutoff")
    rep = verify_lyapunov(ctx, drift, [2.0], [1.0, 3.0, 5.0],
                          SimConfig(dt=2e-3, n_replicas=4000, seed=9))
    print(f"  L rho <= {rep.c1:.3f} - {rep.c2} rho on [0, 50]: "
          f"{rep.pointwise_ok}")
    for t, mean, se, bound, ok in rep.rows:
        print(f"  t={t:3.1f}  E[rho(X_t)] = {mean:.4f} +- {se:.4f} "
              f" <= {bound:.3f}: {ok}")


if __name__ == "__main__":
    main()
