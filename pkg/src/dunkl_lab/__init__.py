"""Laboratory for Markov dynamics driven by Dunkl operators.

Layers, bottom up:

* ``root_system``  root-system catalog, reflection groups, multiplicities
* ``poly``         sparse multivariate polynomials over Q(sqrt 2) or floats
* ``calculus``     Dunkl operators, square fields, generator decomposition
* ``semigroup``    jump-diffusion sampler for P_t = e^{t(Delta_k + b.grad_k)}
                   with gradient-bound, Lyapunov, invariant-measure verifiers
* ``lattice``      coupled site copies on Z^d: truncated semigroups, finite
                   speed of propagation, truncation convergence, coalescence
* ``cli``          reproducible experiment runner (``dunkl-lab`` entry point)
"""

__version__ = "0.1.0"

from .root_system import (RootSystemContext, build_standard, build_from_roots,
                          context_from_config, reflection_matrix,
                          validate_root_system)
from .poly import MultiPoly, poly_from_string
from .calculus import (ConditionError, ConditionReport, DriftSpec,
                       DunklContext, GeneratorDecomposition, eta_constant,
                       integrate_gaussian_weighted, integrate_weighted_1d,
                       probe_points, weight_at)
from .semigroup import (EnsembleEstimate, GradientBoundRow,
                        InvariantMeasureRow, LyapunovReport, LyapunovSpec,
                        ParticleDynamics, SimConfig, encode_site, estimate_pt,
                        estimate_dunkl_gradient_pt,
                        estimate_symmetrised_gradient_pt, simulate_coupled,
                        stream_for, thread_map, verify_gradient_bound,
                        verify_invariant_measure, verify_lyapunov)
from .lattice import (CauchyReport, CylinderFunction, ErgodicityReport,
                      FiniteSpeedReport, InfiniteLyapunovReport,
                      InteractionAudit, InteractionSpec, LatticeSpec,
                      PropagationConstants, audit_interaction,
                      build_default_model, cauchy_convergence_test,
                      compute_constants, coordinate_observable,
                      cylinder_gamma_sup, decoupled_rate_1d,
                      default_probe_windows, ergodicity_test,
                      estimate_window_pt, fill_window, finite_speed_test,
                      infinite_lyapunov_check, interaction_at,
                      simulate_window, sites_in_ball, tanh_observable)

__all__ = [
    "__version__",
    # root systems
    "RootSystemContext", "build_standard", "build_from_roots",
    "context_from_config", "reflection_matrix", "validate_root_system",
    # polynomials
    "MultiPoly", "poly_from_string",
    # calculus
    "ConditionError", "ConditionReport", "DriftSpec", "DunklContext",
    "GeneratorDecomposition", "eta_constant", "integrate_gaussian_weighted",
    "integrate_weighted_1d", "probe_points", "weight_at",
    # finite-dimensional semigroup
    "EnsembleEstimate", "GradientBoundRow", "InvariantMeasureRow",
    "LyapunovReport", "LyapunovSpec", "ParticleDynamics", "SimConfig",
    "encode_site", "estimate_pt", "estimate_dunkl_gradient_pt",
    "estimate_symmetrised_gradient_pt", "simulate_coupled", "stream_for",
    "thread_map", "verify_gradient_bound", "verify_invariant_measure",
    "verify_lyapunov",
    # lattice
    "CauchyReport", "CylinderFunction", "ErgodicityReport",
    "FiniteSpeedReport", "InfiniteLyapunovReport", "InteractionAudit",
    "InteractionSpec", "LatticeSpec", "PropagationConstants",
    "audit_interaction", "build_default_model", "cauchy_convergence_test",
    "compute_constants", "coordinate_observable", "cylinder_gamma_sup",
    "decoupled_rate_1d", "default_probe_windows", "ergodicity_test",
    "estimate_window_pt", "fill_window", "finite_speed_test",
    "infinite_lyapunov_check", "interaction_at", "simulate_window",
    "sites_in_ball", "tanh_observable",
]
