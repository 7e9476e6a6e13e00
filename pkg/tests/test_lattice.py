"""Truncated lattice dynamics: model audits, propagation constants against
hand-derived values, decoupling bit-identities, and the lattice verifiers at
unit scale."""

import math

import numpy as np
import pytest

from dunkl_lab import (InteractionSpec, ParticleDynamics, SimConfig,
                       audit_interaction, build_default_model,
                       cauchy_convergence_test, compute_constants,
                       coordinate_observable, cylinder_gamma_sup,
                       decoupled_rate_1d, default_probe_windows, encode_site,
                       ergodicity_test, estimate_window_pt, fill_window,
                       finite_speed_test, infinite_lyapunov_check,
                       interaction_at, simulate_coupled, simulate_window,
                       sites_in_ball, tanh_observable)
from dunkl_lab.lattice import distance_to_set, n_l_of, site_distance


def test_default_model_guards():
    with pytest.raises(ValueError):
        build_default_model(eps0=1.5, c=1.0)  # eps0 > c can break rates
    with pytest.raises(ValueError):
        build_default_model(decay="uniform")  # needs explicit opt in
    with pytest.raises(ValueError):
        build_default_model(N=2, family="A", rank=1)  # dimension mismatch
    build_default_model(decay="uniform", allow_uniform=True)


def test_amplitude_profile_and_zeta():
    inter = InteractionSpec(d=1, eps0=0.1, decay="summable", delta=1.0)
    assert inter.eps_at((0,)) == 0.1
    assert inter.eps_at((3,)) == pytest.approx(0.1 / 16.0)
    assert math.isfinite(inter.zeta())
    uniform = InteractionSpec(d=1, eps0=0.1, decay="uniform")
    assert uniform.eps_at((100,)) == 0.1
    assert uniform.zeta() == math.inf
    off = InteractionSpec(d=1, eps0=0.0)
    assert off.zeta() == 0.0


def test_sites_and_distances():
    assert sites_in_ball(1, 2) == [(-2,), (-1,), (0,), (1,), (2,)]
    assert len(sites_in_ball(2, 1)) == 5  # l1 diamond
    assert site_distance((3,), (-1,)) == 4
    assert distance_to_set((3,), [(0,), (1,)]) == 2
    spec = build_default_model()
    # N_l = floor(dist/range) + 1 with range 2
    assert n_l_of(spec, (1,), [(0,)]) == 1
    assert n_l_of(spec, (3,), [(0,)]) == 2
    assert n_l_of(spec, (5,), [(0,)]) == 3


def test_interaction_audit_is_exact():
    audit = audit_interaction(build_default_model(), n_probes=500, seed=0)
    assert audit.passed
    assert audit.stencil_max == 0.0
    assert audit.equivariance_max <= 1e-12


def test_interaction_respects_amplitude_bound():
    # |e^(l)| <= eps_l sup|u| sup|v| = eps_l / 2
    spec = build_default_model()
    rng = np.random.default_rng(31)
    for _ in range(50):
        omega = rng.normal(size=(spec.n_window, spec.N))
        for site in [(-2,), (0,), (3,)]:
            e = interaction_at(spec, omega, site)
            assert np.linalg.norm(e) <= spec.interaction.eps_at(site) * 0.5 + 1e-12


def test_window_and_fill_helpers():
    spec = build_default_model(box_radius=3)
    w = fill_window(spec, fill=0.2, overrides={(1,): [2.5]})
    assert w.shape == (spec.n_window, spec.N)
    assert w[spec.site_index[(1,)], 0] == 2.5
    assert w[spec.site_index[(0,)], 0] == 0.2
    probes = default_probe_windows(spec, 4, seed=2)
    assert probes.shape == (4, spec.n_window, spec.N)
    again = default_probe_windows(spec, 4, seed=2)
    assert np.array_equal(probes, again)
    gaps = np.abs(np.einsum("pwn,an->pwa", probes, spec.roots_np))
    assert gaps.min() >= 0.05


def test_frozen_propagation_constants():
    """Worked constants of the default model (k = 1/4, c = 1, eps0 = 0.1,
    delta = 1, range 2): eta = -1/2 exactly, and the perturbed constants
    from the amplitude split eps = sqrt(2)."""
    spec = build_default_model()
    c = compute_constants(spec)
    assert c.eta == pytest.approx(-0.5, abs=1e-12)
    assert c.gamma == 0.25
    assert c.group_order == 2
    assert c.s_sup == pytest.approx(0.149540, abs=2e-6)
    assert c.eta_tilde == pytest.approx(-0.356874, abs=2e-6)
    assert c.c_tilde == pytest.approx(0.286252, abs=2e-6)
    assert c.zeta == pytest.approx(0.114493, abs=2e-6)
    assert c.ergodic_ok and not c.exploratory
    c2 = compute_constants(spec, tau=2.0)
    assert c2.sigma == pytest.approx(0.200226, abs=2e-6)


def test_frozen_gamma_sup_for_tanh():
    # sup Gamma-tilde(tanh) = |G| (1 + 2k)^2 attained in the zero limit
    spec = build_default_model()
    val = cylinder_gamma_sup(spec, tanh_observable())
    assert val == pytest.approx(4.5, abs=1e-9)


def test_decoupled_rate_closed_form():
    assert decoupled_rate_1d(build_default_model(eps0=0.0)) == -1.5
    with pytest.raises(ValueError):
        decoupled_rate_1d(build_default_model(N=2, family="B", rank=2, k=0.25))


def test_decoupled_window_matches_single_site_runs():
    """With the interaction off each window site reproduces the single-site
    sampler bitwise on its own stream."""
    spec = build_default_model(eps0=0.0, box_radius=3)
    win = fill_window(spec, fill=0.3, overrides={(0,): [1.2], (2,): [-0.7]})
    cfg = SimConfig(dt=1e-3, n_replicas=300, seed=9)
    states, _ = simulate_window(spec, win, [0.25, 0.5], cfg)
    dyn = ParticleDynamics(spec.ctx, spec.site_drift)
    for s_idx, site in enumerate(spec.window_sites):
        single, _ = simulate_coupled(dyn, win[s_idx:s_idx + 1], [0.25, 0.5],
                                     cfg, stream_tag=encode_site(site))
        for chk in range(2):
            assert np.array_equal(states[chk][0][:, s_idx, :], single[chk][0])


def test_window_estimate_decoupled_mean():
    spec = build_default_model(eps0=0.0, box_radius=2)
    om = fill_window(spec, fill=0.2, overrides={(0,): [1.0]})
    t = 0.5
    est = estimate_window_pt(spec, coordinate_observable(), om, t,
                             SimConfig(dt=1e-3, n_replicas=4000, seed=10))
    want = math.exp(-1.5 * t)
    assert abs(est.mean - want) <= 3 * est.std_error


def test_cauchy_differences_vanish_exactly_when_decoupled():
    spec = build_default_model(eps0=0.0, box_radius=3)
    rep = cauchy_convergence_test(spec, tanh_observable(), 0.5, [2, 3],
                                  SimConfig(dt=2e-3, n_replicas=200, seed=11),
                                  n_probes=2)
    assert rep.verdict == "decoupled-exact"
    assert rep.all_exact_zero
    for row in rep.rows:
        assert row.d_n == 0.0 and row.exact_zero


def test_ergodicity_identical_configurations_stay_glued():
    spec = build_default_model()
    om = fill_window(spec, fill=0.2, overrides={(0,): [1.0]})
    rep = ergodicity_test(spec, coordinate_observable(), om, om.copy(),
                          [0.25, 0.5], SimConfig(dt=2e-3, n_replicas=300, seed=12))
    assert rep.identical
    for t, delta, se in rep.rows:
        assert delta == 0.0


def test_ergodicity_decoupled_rate_near_closed_form():
    spec = build_default_model(eps0=0.0, box_radius=0)
    om = fill_window(spec, fill=0.2, overrides={(0,): [1.0]})
    omp = fill_window(spec, fill=0.2)
    rep = ergodicity_test(spec, coordinate_observable(), om, omp,
                          [0.25, 0.5, 0.75, 1.0, 1.5],
                          SimConfig(dt=1e-3, n_replicas=1500, seed=13))
    assert rep.passed
    assert abs(rep.rate - (-1.5)) <= 0.3


def test_finite_speed_front_collapses_with_distance():
    spec = build_default_model()
    rep = finite_speed_test(spec, tanh_observable(), [(1,), (3,)], 0.5,
                            SimConfig(dt=1e-3, n_replicas=600, seed=14),
                            h=0.1, n_probes=2)
    assert rep.strictly_decreasing
    assert rep.below_envelope
    assert rep.passed
    assert rep.rows[0].gamma_est > rep.rows[1].gamma_est
    assert rep.rows[0].n_l == 1 and rep.rows[1].n_l == 2


def test_infinite_lyapunov_unit_scale():
    spec = build_default_model()
    rep = infinite_lyapunov_check(spec, [0.5, 1.0],
                                  SimConfig(dt=2e-3, n_replicas=300, seed=15),
                                  n_probes=8)
    assert rep.audit_ok
    assert rep.passed
    assert rep.weight_sum > 0


def test_window_time_zero_checkpoint_is_initial_state():
    spec = build_default_model(box_radius=2)
    win = fill_window(spec, fill=0.4)
    states, flags = simulate_window(spec, win, [0.0], SimConfig(n_replicas=50, seed=16))
    assert np.all(states[0][0] == win[None, :, :])
    assert not flags.any()


def test_observable_value_conventions():
    spec = build_default_model(box_radius=2)
    win = fill_window(spec, fill=0.0, overrides={(1,): [0.7]})
    f = coordinate_observable(site=(1,))
    g = tanh_observable(site=(1,))
    assert f.values(win, spec) == pytest.approx(0.7)
    assert g.values(win, spec) == pytest.approx(math.tanh(0.7))
