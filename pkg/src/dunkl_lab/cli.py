"""Reproducible experiment runner: one subcommand per experiment family.

    dunkl-lab <subcommand> --config path.json [--seed U64] [--out dir]

Subcommands: calculus-check, fd-sim, gradient-bound, lyapunov,
invariant-measure, lattice-sim, cauchy, finite-speed, ergodicity.

Each run validates its config against a JSON schema, executes the experiment,
and writes a results CSV plus a summary.json into the output directory.  The
summary carries a three-valued verdict (pass / fail / inconclusive; a fail
needs a violation resolved at three standard errors), the audited hypothesis
checklist, margins, seeds, and library versions.  Output bytes are a pure
function of the config file and seed: floats are rendered with shortest
round-trip repr, JSON keys are sorted, CSVs use fixed headers and newline
terminators, so reruns produce byte-identical files.

Exit codes: 0 pass (inconclusive also exits 0 unless the config sets
"strict": true), 1 fail, 2 config or schema violation, 3 hypothesis-audit
failure.  DUNKL_LAB_THREADS caps the worker pool of the lattice stepper.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
from dataclasses import asdict
from fractions import Fraction

import numpy as np
import scipy
from jsonschema import Draft202012Validator

from . import __version__
from .calculus import (ConditionError, DriftSpec, DunklContext,
                       GeneratorDecomposition, eta_constant, probe_points)
from .lattice import (audit_interaction, build_default_model,
                      cauchy_convergence_test, compute_constants,
                      coordinate_observable, decoupled_rate_1d,
                      ergodicity_test, estimate_window_pt, fill_window,
                      finite_speed_test, infinite_lyapunov_check,
                      tanh_observable)
from .poly import MultiPoly, poly_from_string
from .root_system import context_from_config, reflection_matrix
from .semigroup import (SimConfig, _as_callable, estimate_pt,
                        verify_gradient_bound, verify_invariant_measure,
                        verify_lyapunov)

__all__ = ["main"]


class _ConfigError(ValueError):
    """Config is schema-valid but semantically inconsistent (exit code 2)."""


# -- schemas ---------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1}
_K = {}   # numbers, "p/q" strings, arrays, or per-orbit maps; the root layer parses

_ROOT = {"oneOf": [
    {"type": "object",
     "properties": {"family": {"type": "string"},
                    "rank": {"type": "integer", "minimum": 1},
                    "k": _K,
                    "scalar_mode": {"enum": ["exact", "float"]}},
     "required": ["family", "rank", "k"], "additionalProperties": False},
    {"type": "object",
     "properties": {"roots": {"type": "array", "minItems": 1,
                              "items": {"type": "array", "items": _NUM,
                                        "minItems": 1}},
                    "k": _K,
                    "scalar_mode": {"enum": ["exact", "float"]}},
     "required": ["roots", "k"], "additionalProperties": False},
]}

# the runner covers the linear catalog; custom drifts need a callable and are
# a library-level feature
_DRIFT = {"type": "object",
          "properties": {"kind": {"const": "linear"},
                         "c": {"oneOf": [_POS, {"type": "string"}]}},
          "required": ["kind", "c"], "additionalProperties": False}

_SIM = {"type": "object",
        "properties": {"dt": _POS,
                       "n_replicas": {"type": "integer", "minimum": 1},
                       "p_max": _POS, "delta_max": _POS, "eps_hyp": _POS,
                       "min_substep_factor": _POS,
                       "substep_cap": {"type": "integer", "minimum": 1}},
        "additionalProperties": False}

_F = {"oneOf": [
    {"type": "string"},
    {"type": "object",
     "properties": {"kind": {"const": "tanh"},
                    "component": {"type": "integer", "minimum": 1}},
     "required": ["kind"], "additionalProperties": False},
]}

_SITE = {"type": "array", "items": {"type": "integer"},
         "minItems": 1, "maxItems": 6}

_LATTICE = {"type": "object",
            "properties": {
                "d": {"type": "integer", "minimum": 1, "maximum": 6},
                "N": {"type": "integer", "minimum": 1},
                "family": {"type": "string"},
                "rank": {"type": "integer", "minimum": 1},
                "k": _K,
                "c": _POS,
                "eps0": _NONNEG,
                "decay": {"type": "object",
                          "properties": {"type": {"enum": ["summable",
                                                           "uniform"]},
                                         "delta": _POS},
                          "required": ["type"], "additionalProperties": False},
                "range": {"type": "integer", "minimum": 1},
                "box_radius": {"type": "integer", "minimum": 0},
                "window_radius": {"type": "integer", "minimum": 0},
                "allow_uniform": {"type": "boolean"},
            },
            "required": ["d", "N", "family", "rank", "k", "c", "eps0",
                         "range", "box_radius"],
            "additionalProperties": False}

_OBSERVABLE = {"type": "object",
               "properties": {"kind": {"enum": ["coordinate", "tanh"]},
                              "site": _SITE,
                              "component": {"type": "integer", "minimum": 1}},
               "required": ["kind"], "additionalProperties": False}

_WINDOW = {"type": "object",
           "properties": {
               "fill": _NUM,
               "overrides": {"type": "array",
                             "items": {"type": "object",
                                       "properties": {"site": _SITE,
                                                      "value": {"type": "array",
                                                                "items": _NUM,
                                                                "minItems": 1}},
                                       "required": ["site", "value"],
                                       "additionalProperties": False}}},
           "additionalProperties": False}

_T_GRID = {"type": "array", "items": _NONNEG, "minItems": 1}
_COMMON = {"seed": _SEED, "out": {"type": "string"}, "strict": {"type": "boolean"}}


def _schema(properties: dict, required: list) -> dict:
    props = dict(_COMMON)
    props.update(properties)
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


SCHEMAS = {
    "calculus-check": _schema(
        {"root": _ROOT, "drift": _DRIFT,
         "n_polys": {"type": "integer", "minimum": 1, "maximum": 500},
         "degree": {"type": "integer", "minimum": 1, "maximum": 12},
         "n_probes": {"type": "integer", "minimum": 10, "maximum": 1_000_000}},
        ["root"]),
    "fd-sim": _schema(
        {"root": _ROOT, "drift": _DRIFT, "f": _F,
         "x0": {"type": "array", "items": _NUM, "minItems": 1},
         "t_grid": _T_GRID, "sim": _SIM},
        ["root", "drift", "f", "x0", "t_grid"]),
    "gradient-bound": _schema(
        {"root": _ROOT, "drift": _DRIFT, "f": _F, "t_grid": _T_GRID,
         "probes": {"type": "array", "minItems": 1,
                    "items": {"type": "array", "items": _NUM, "minItems": 1}},
         "n_probes": {"type": "integer", "minimum": 1, "maximum": 64},
         "probe_radius": _POS, "h": _POS, "sim": _SIM},
        ["root", "drift", "f", "t_grid"]),
    "lyapunov": {"oneOf": [
        _schema({"root": _ROOT, "drift": _DRIFT,
                 "x0": {"type": "array", "items": _NUM, "minItems": 1},
                 "t_grid": _T_GRID, "c2": _POS, "r_max": _POS, "sim": _SIM},
                ["root", "drift", "x0", "t_grid"]),
        _schema({"lattice": _LATTICE, "t_grid": _T_GRID, "c2": _POS,
                 "r_max": _POS, "omega0": _WINDOW,
                 "n_probes": {"type": "integer", "minimum": 1, "maximum": 4096},
                 "audit_probes": {"type": "integer", "minimum": 10,
                                  "maximum": 100_000},
                 "sim": _SIM},
                ["lattice", "t_grid"]),
    ]},
    "invariant-measure": _schema(
        {"root": _ROOT, "drift": _DRIFT,
         "fs": {"type": "array", "items": {"type": "string"}, "minItems": 1},
         "t_long": _POS, "burn_in": _NONNEG, "sample_every": _POS,
         "quad_tol": _POS, "sim": _SIM},
        ["root", "drift"]),
    "lattice-sim": _schema(
        {"lattice": _LATTICE, "observable": _OBSERVABLE, "omega0": _WINDOW,
         "t_grid": _T_GRID,
         "audit_probes": {"type": "integer", "minimum": 10, "maximum": 100_000},
         "sim": _SIM},
        ["lattice", "t_grid"]),
    "cauchy": _schema(
        {"lattice": _LATTICE, "observable": _OBSERVABLE, "t": _POS,
         "box_radii": {"type": "array", "minItems": 2,
                       "items": {"type": "integer", "minimum": 0}},
         "n_probes": {"type": "integer", "minimum": 1, "maximum": 64},
         "audit_probes": {"type": "integer", "minimum": 10, "maximum": 100_000},
         "sim": _SIM},
        ["lattice", "t", "box_radii"]),
    "finite-speed": _schema(
        {"lattice": _LATTICE, "observable": _OBSERVABLE, "s": _POS,
         "sites": {"type": "array", "items": _SITE, "minItems": 2},
         "h": _POS, "n_probes": {"type": "integer", "minimum": 1, "maximum": 64},
         "eps_split": _POS,
         "audit_probes": {"type": "integer", "minimum": 10, "maximum": 100_000},
         "sim": _SIM},
        ["lattice", "s", "sites"]),
    "ergodicity": _schema(
        {"lattice": _LATTICE, "observable": _OBSERVABLE, "omega0": _WINDOW,
         "omega0_prime": _WINDOW, "t_grid": _T_GRID,
         "audit_probes": {"type": "integer", "minimum": 10, "maximum": 100_000},
         "sim": _SIM},
        ["lattice", "omega0", "omega0_prime", "t_grid"]),
}

_CSV_NAME = {
    "calculus-check": "identities.csv",
    "fd-sim": "fd_sim.csv",
    "gradient-bound": "gradient_bound.csv",
    "lyapunov": "lyapunov.csv",
    "invariant-measure": "invariant_measure.csv",
    "lattice-sim": "lattice_sim.csv",
    "cauchy": "cauchy.csv",
    "finite-speed": "finite_speed.csv",
    "ergodicity": "ergodicity.csv",
}

FD_HEADER = ["experiment", "system", "k", "c", "t", "x", "quantity",
             "estimate", "std_error", "bound", "margin", "pass"]


# -- canonical formatting ----------------------------------------------------------


def _cell(v) -> str:
    """Canonical CSV cell: shortest round-trip floats, stable joins."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if isinstance(v, (tuple, list, np.ndarray)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _canon(v):
    """JSON-safe deterministic value tree (non-finite floats become strings)."""
    if isinstance(v, dict):
        return {str(k): _canon(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_canon(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_canon(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return v


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


# -- config interpretation ---------------------------------------------------------


def _context(block) -> DunklContext:
    try:
        return DunklContext(context_from_config(block))
    except ValueError as e:
        raise _ConfigError(f"root descriptor: {e}") from e


def _drift(block) -> DriftSpec:
    c = block["c"]
    if isinstance(c, str):
        try:
            c = Fraction(c)
        except (ValueError, ZeroDivisionError) as e:
            raise _ConfigError(f"drift coefficient {c!r}: {e}") from e
        if c <= 0:
            raise _ConfigError("drift coefficient must be positive")
    elif isinstance(c, int):
        c = Fraction(c)
    return DriftSpec.linear(c)


def _sim_config(cfg: dict, seed: int) -> SimConfig:
    return SimConfig(seed=seed, **cfg.get("sim", {}))


def _k_label(root) -> str:
    seen = []
    for m in root.multiplicities:
        s = str(m)
        if s not in seen:
            seen.append(s)
    return ";".join(seen)


def _k_value(k):
    if isinstance(k, str):
        return Fraction(k)
    if isinstance(k, list):
        return [_k_value(v) for v in k]
    if isinstance(k, dict):
        return {key: _k_value(v) for key, v in k.items()}
    return k


def _fd_observable(block, ctx: DunklContext):
    """-> (f, smooth gradient callable, label); f is a MultiPoly or callable."""
    n = ctx.n
    if isinstance(block, str):
        try:
            p = poly_from_string(block, n, mode=ctx.mode)
        except ValueError as e:
            raise _ConfigError(f"observable {block!r}: {e}") from e
        parts = [_as_callable(p.partial_derivative(i), n) for i in range(n)]

        def grad(x, _parts=parts):
            x = np.asarray(x, dtype=float)
            return np.stack([g(x) for g in _parts], axis=-1)

        return p, grad, p.to_string()
    comp = int(block.get("component", 1)) - 1
    if not 0 <= comp < n:
        raise _ConfigError(f"component {comp + 1} outside 1..{n}")

    def f(x, _j=comp):
        return np.tanh(np.asarray(x, dtype=float)[..., _j])

    def grad(x, _j=comp):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape)
        g[..., _j] = 1.0 / np.cosh(x[..., _j]) ** 2
        return g

    return f, grad, f"tanh(x{comp + 1})"


def _lattice_model(block: dict, box_override: int | None = None):
    decay = block.get("decay", {"type": "summable"})
    box = block["box_radius"]
    window = block.get("window_radius")
    if box_override is not None and box_override > box:
        box, window = box_override, None
    return build_default_model(
        d=block["d"], N=block["N"], family=block["family"],
        rank=block["rank"], k=_k_value(block["k"]), c=float(block["c"]),
        eps0=float(block["eps0"]), decay=decay["type"],
        delta=float(decay.get("delta", 1.0)), range_R=block["range"],
        box_radius=box, window_radius=window,
        allow_uniform=bool(block.get("allow_uniform", False)))


def _lattice_observable(block, spec):
    block = block or {"kind": "tanh"}
    site = tuple(int(v) for v in block.get("site", (0,) * spec.d))
    if len(site) != spec.d:
        raise _ConfigError(f"observable site {site} is not a Z^{spec.d} site")
    if site not in spec.site_index:
        raise _ConfigError(f"observable site {site} lies outside the window")
    comp = int(block.get("component", 1)) - 1
    if not 0 <= comp < spec.N:
        raise _ConfigError(f"component {comp + 1} outside 1..{spec.N}")
    if block["kind"] == "coordinate":
        return coordinate_observable(site, comp)
    return tanh_observable(site, comp)


def _window_config(block, spec) -> np.ndarray:
    block = block or {}
    overrides = {}
    for o in block.get("overrides", []):
        site = tuple(int(v) for v in o["site"])
        if site not in spec.site_index:
            raise _ConfigError(f"override site {site} lies outside the window")
        if len(o["value"]) != spec.N:
            raise _ConfigError(f"override at {site} needs {spec.N} components")
        overrides[site] = o["value"]
    return fill_window(spec, float(block.get("fill", 0.2)), overrides)


# -- hypothesis checklist ------------------------------------------------------------


def _particle_hypotheses(ctx: DunklContext, drift: DriftSpec, seed: int):
    eq = drift.audit_equivariance(ctx, seed=seed)
    rate = drift.audit_rate_condition(ctx, seed=seed)
    for rep in (eq, rate):
        if not rep.passed:
            raise ConditionError(f"{rep.name}: worst {rep.worst_value:.3e} at "
                                 f"{rep.witness}", witness=rep.witness)
    eta = float(eta_constant(drift, ctx))
    gamma = float(ctx.root.gamma)
    items = {
        "drift-equivariance": {"status": "pass", "worst": eq.worst_value},
        "jump-rate-sign": {"status": "pass", "worst": rate.worst_value},
        "eta-negative": {"status": "pass" if eta < 0 else "warn", "value": eta},
        "gamma-below-half": {"status": "pass" if gamma < 0.5 else "warn",
                             "value": gamma},
        "zeta-finite": {"status": "not-applicable"},
        "coalescence-constants": {"status": "not-applicable"},
    }
    notes = []
    if eta >= 0:
        notes.append("eta >= 0: outside the coercive regime, the gradient "
                     "bound certificate grows with t")
    if gamma >= 0.5:
        notes.append("gamma >= 1/2 makes eta = -c + 2 c gamma nonnegative "
                     "for every linear drift")
    return items, notes, eta, gamma


def _lattice_hypotheses(spec, seed: int, audit_probes: int):
    audit = audit_interaction(spec, n_probes=audit_probes, seed=seed)
    if not audit.passed:
        raise ConditionError(
            f"interaction audit failed: stencil {audit.stencil_max:.3e}, "
            f"equivariance {audit.equivariance_max:.3e}, locality "
            f"{audit.locality_max:.3e}, worst rate {audit.worst_rate:.3e}")
    consts = compute_constants(spec)
    items = {
        "drift-equivariance": {"status": "pass",
                               "worst": audit.equivariance_max},
        "jump-rate-sign": {"status": "pass", "worst": audit.worst_rate},
        "eta-negative": {"status": "pass" if consts.eta < 0 else "warn",
                         "value": consts.eta},
        "gamma-below-half": {"status": "pass" if consts.gamma < 0.5 else "warn",
                             "value": consts.gamma},
        "zeta-finite": {"status": "pass" if math.isfinite(consts.zeta)
                        else "warn", "value": consts.zeta},
        "coalescence-constants": {"status": "pass" if consts.ergodic_ok
                                  else "warn",
                                  "eta_tilde": consts.eta_tilde,
                                  "c_tilde": consts.c_tilde},
    }
    notes = []
    if consts.eta >= 0:
        notes.append("eta >= 0: outside the coercive regime")
    if consts.gamma >= 0.5:
        notes.append("gamma >= 1/2: contraction constants are exploratory")
    if not math.isfinite(consts.zeta):
        notes.append("amplitude profile is not summable: truncation limits "
                     "are exploratory")
    if not consts.ergodic_ok:
        notes.append("eta_tilde/c_tilde fail the coalescence condition: "
                     "ergodic decay is not certified")
    return items, notes, consts, audit


# -- runners -----------------------------------------------------------------------


def _random_rational_poly(n: int, degree: int, rng, mode: str,
                          n_terms: int = 6) -> MultiPoly:
    terms = {}
    for _ in range(n_terms):
        total = int(rng.integers(0, degree + 1))
        exps = tuple(int(e) for e in rng.multinomial(total, [1.0 / n] * n))
        num = int(rng.integers(-9, 10)) or 1
        den = int(rng.integers(1, 10))
        coeff = Fraction(num, den) if mode == "exact" else num / den
        terms[exps] = terms.get(exps, 0) + coeff
    p = MultiPoly(n, terms, mode)
    return p if not p.is_zero() else MultiPoly.variable(0, n, mode)


def _run_calculus_check(cfg: dict, seed: int) -> dict:
    ctx = _context(cfg["root"])
    drift = _drift(cfg.get("drift", {"kind": "linear", "c": 1}))
    n_polys = int(cfg.get("n_polys", 25))
    degree = int(cfg.get("degree", 6))
    rng = np.random.default_rng(seed)
    polys = [_random_rational_poly(ctx.n, degree, rng, ctx.mode)
             for _ in range(n_polys)]
    decomp = GeneratorDecomposition(ctx, drift)
    sig = [reflection_matrix(a, ctx.mode) for a in ctx.root.positive_roots]

    worst: dict = {}

    def track(name, residual):
        worst[name] = max(worst.get(name, 0.0), float(residual.max_abs_coeff()))

    for idx, f in enumerate(polys):
        g = polys[(idx + 1) % len(polys)]
        for i in range(ctx.n):
            for j in range(i + 1, ctx.n):
                track("commutativity T_i T_j = T_j T_i",
                      ctx.dunkl_t(ctx.dunkl_t(f, j), i)
                      - ctx.dunkl_t(ctx.dunkl_t(f, i), j))
        track("laplacian sum of squares = closed form",
              ctx.dunkl_laplacian(f, "sum_of_squares")
              - ctx.dunkl_laplacian(f, "closed_form"))
        for i in range(ctx.n):
            track("leibniz defect = predicted formula",
                  ctx.leibniz_defect(f, g, i) - ctx.leibniz_formula(f, g, i))
        track("square field definition = closed form",
              ctx.carre_du_champ(f, "definition")
              - ctx.carre_du_champ(f, "closed_form"))
        track("drift square field definition = closed form",
              ctx.gamma_l(f, drift, "definition")
              - ctx.gamma_l(f, drift, "closed_form"))
        track("generator = diffusion + singular drift + jumps",
              decomp.identity_residual(f))
        for m in sig:
            fg = f.compose_linear(m)
            lhs = ctx.dunkl_gradient(fg)
            comp = [gc.compose_linear(m) for gc in ctx.dunkl_gradient(f)]
            for i in range(ctx.n):
                expect = ctx.poly_zero()
                for jv in range(ctx.n):
                    expect = expect + comp[jv].scale(m[jv][i])
                track("gradient equivariance under reflections",
                      lhs[i] - expect)

    root_f = ctx.root if ctx.root.scalar_mode == "float" else ctx.root.to_float()
    pts = probe_points(root_f, int(cfg.get("n_probes", 2000)), seed=seed,
                       near_hyperplane=True)
    rate_rep = decomp.rates_nonnegative(pts)
    worst["jump rates nonnegative at probes"] = max(0.0, -rate_rep.worst_value)

    k_str = _k_label(ctx.root)
    checks = [{"check": name, "system": ctx.root.label, "k": k_str,
               "max_abs_residual": worst[name]} for name in sorted(worst)]
    rows = [(c["check"], c["system"], c["k"], c["max_abs_residual"])
            for c in checks]
    tol = 0.0 if ctx.mode == "exact" else 1e-10
    ok = all(c["max_abs_residual"] <= tol for c in checks)
    max_resid = max(c["max_abs_residual"] for c in checks)
    items, notes, eta, gamma = _particle_hypotheses(ctx, drift, seed)
    return {
        "verdict": "pass" if ok else "fail",
        "csv": (_CSV_NAME["calculus-check"],
                ["check", "system", "k", "max_abs_residual"], rows),
        "margins": {"max_abs_residual": max_resid},
        "hypotheses": items, "notes": notes,
        "details": {"checks": checks, "n_polys": n_polys, "degree": degree,
                    "scalar_mode": ctx.mode, "eta": eta, "gamma": gamma},
        "line": f"{len(checks)} identity checks on {ctx.root.label}, "
                f"max residual {_cell(max_resid)}",
    }


def _run_fd_sim(cfg: dict, seed: int) -> dict:
    ctx = _context(cfg["root"])
    drift = _drift(cfg["drift"])
    simc = _sim_config(cfg, seed)
    items, notes, eta, gamma = _particle_hypotheses(ctx, drift, seed)
    f, _, label = _fd_observable(cfg["f"], ctx)
    x0 = [float(v) for v in cfg["x0"]]
    if len(x0) != ctx.n:
        raise _ConfigError(f"x0 has {len(x0)} coordinates, the system lives "
                           f"in R^{ctx.n}")
    t_grid = [float(t) for t in cfg["t_grid"]]
    ests = estimate_pt(ctx, drift, f, x0, t_grid, simc,
                       quantity=f"P_t[{label}]")
    k_str = _k_label(ctx.root)
    rows = [("fd-sim", ctx.root.label, k_str, drift.c_float, e.t, tuple(x0),
             e.quantity, e.mean, e.std_error, None, None, not e.unreliable)
            for e in ests]
    ok = all(not e.unreliable for e in ests)
    max_se = max(e.std_error for e in ests)
    return {
        "verdict": "pass" if ok else "inconclusive",
        "csv": (_CSV_NAME["fd-sim"], FD_HEADER, rows),
        "margins": {"max_std_error": max_se,
                    "n_flagged": ests[-1].n_flagged},
        "hypotheses": items, "notes": notes,
        "details": {"eta": eta, "gamma": gamma, "x0": x0,
                    "n_replicas": simc.n_replicas},
        "line": f"{len(rows)} estimates of P_t[{label}], max std error "
                f"{_cell(max_se)}",
    }


def _run_gradient_bound(cfg: dict, seed: int) -> dict:
    ctx = _context(cfg["root"])
    drift = _drift(cfg["drift"])
    simc = _sim_config(cfg, seed)
    items, notes, eta, gamma = _particle_hypotheses(ctx, drift, seed)
    f, grad_f, label = _fd_observable(cfg["f"], ctx)
    h = float(cfg.get("h", 1e-3))
    if "probes" in cfg:
        probes = np.asarray(cfg["probes"], dtype=float)
        if probes.ndim != 2 or probes.shape[1] != ctx.n:
            raise _ConfigError(f"probes must be rows of length {ctx.n}")
    else:
        probes = probe_points(ctx.root, int(cfg.get("n_probes", 4)),
                              radius=float(cfg.get("probe_radius", 3.0)),
                              seed=seed)
    t_grid = [float(t) for t in cfg["t_grid"]]
    lib_rows = verify_gradient_bound(ctx, drift, f, probes, t_grid, simc,
                                     h=h, grad_f=grad_f)
    rows, all_ok, min_margin, min_z = [], True, math.inf, math.inf
    for r in lib_rows:
        # at t = 0 both sides are the same finite-difference evaluation; the
        # row is judged by the O(h^2) truncation scale, not by replica noise
        ok = r.passed or (r.t == 0.0
                          and abs(r.margin) <= 1e-4 * (1.0 + abs(r.rhs)))
        all_ok = all_ok and ok
        min_margin = min(min_margin, r.margin)
        if r.combined_se > 0:
            min_z = min(min_z, r.margin / r.combined_se)
        rows.append(("gradient-bound", r.system, _k_label(ctx.root),
                     drift.c_float, r.t, r.x, f"Gamma-tilde(P_t[{label}])",
                     r.lhs, r.lhs_se, r.rhs, r.margin, ok))
    return {
        "verdict": "pass" if all_ok else "fail",
        "csv": (_CSV_NAME["gradient-bound"], FD_HEADER, rows),
        "margins": {"min_margin": min_margin,
                    "min_margin_over_se": min_z, "eta": eta},
        "hypotheses": items, "notes": notes,
        "details": {"eta": eta, "gamma": gamma, "h": h,
                    "n_probes": len(probes), "n_rows": len(rows)},
        "line": f"{len(rows)} probe/time pairs, min margin "
                f"{_cell(min_margin)}",
    }


def _run_lyapunov(cfg: dict, seed: int) -> dict:
    simc = _sim_config(cfg, seed)
    t_grid = [float(t) for t in cfg["t_grid"]]
    c2 = float(cfg.get("c2", 0.5))
    r_max = float(cfg.get("r_max", 50.0))
    if "lattice" in cfg:
        spec = _lattice_model(cfg["lattice"])
        items, notes, consts, _ = _lattice_hypotheses(
            spec, seed, int(cfg.get("audit_probes", 200)))
        omega0 = (_window_config(cfg["omega0"], spec)
                  if "omega0" in cfg else None)
        rep = infinite_lyapunov_check(spec, t_grid, simc, c2=c2,
                                      omega0=omega0,
                                      n_probes=int(cfg.get("n_probes", 32)),
                                      r_max=r_max)
        if not rep.audit_ok:
            raise ConditionError(
                f"sitewise coercivity audit failed at {rep.witness}",
                witness=rep.witness)
        ctx = spec.ctx
        quantity = "E[rho_weighted(omega_t)]"
        c_val = float(spec.site_drift.c)
        details = {"e_term_bound": rep.e_term_bound,
                   "weight_sum": rep.weight_sum, "n_flagged": rep.n_flagged,
                   "constants": asdict(consts)}
    else:
        ctx = _context(cfg["root"])
        drift = _drift(cfg["drift"])
        items, notes, eta, gamma = _particle_hypotheses(ctx, drift, seed)
        x0 = [float(v) for v in cfg["x0"]]
        if len(x0) != ctx.n:
            raise _ConfigError(f"x0 has {len(x0)} coordinates, the system "
                               f"lives in R^{ctx.n}")
        rep = verify_lyapunov(ctx, drift, x0, t_grid, simc, c2=c2,
                              r_max=r_max)
        quantity = "E[rho(X_t)]"
        c_val = drift.c_float
        details = {"eta": eta, "gamma": gamma, "x0": x0,
                   "drift_coercive": rep.drift_coercive,
                   "pointwise_ok": rep.pointwise_ok,
                   "n_flagged": rep.n_flagged}
    k_str = _k_label(ctx.root)
    rows = [("lyapunov", ctx.root.label, k_str, c_val, t, None, quantity,
             mean, se, bound, bound - mean, ok)
            for (t, mean, se, bound, ok) in rep.rows]
    min_slack = min((bound - mean for (_, mean, _, bound, _) in rep.rows),
                    default=math.inf)
    details.update({"c1": rep.c1, "c2": rep.c2})
    return {
        "verdict": "pass" if rep.passed else "fail",
        "csv": (_CSV_NAME["lyapunov"], FD_HEADER, rows),
        "margins": {"c1": rep.c1, "c2": rep.c2, "min_slack": min_slack},
        "hypotheses": items, "notes": notes, "details": details,
        "line": f"{len(rows)} checkpoints, min slack {_cell(min_slack)}",
    }


def _run_invariant_measure(cfg: dict, seed: int) -> dict:
    ctx = _context(cfg["root"])
    drift = _drift(cfg["drift"])
    simc = _sim_config(cfg, seed)
    items, notes, eta, gamma = _particle_hypotheses(ctx, drift, seed)
    t_long = float(cfg.get("t_long", 8.0))
    burn_in = float(cfg.get("burn_in", 3.0))
    if burn_in >= t_long:
        raise _ConfigError("burn_in must be smaller than t_long")
    if ctx.n == 1:
        default_fs = ["x1", "x1^2", "x1^4"]
    elif ctx.n == 2:
        default_fs = ["x1", "x2", "x1^2", "x2^2", "x1*x2"]
    else:
        default_fs = ["x1", "x1^2", "x1*x2"]
    fs = []
    for s in cfg.get("fs", default_fs):
        try:
            fs.append(poly_from_string(s, ctx.n, mode=ctx.mode))
        except ValueError as e:
            raise _ConfigError(f"observable {s!r}: {e}") from e
    lib_rows = verify_invariant_measure(
        ctx, drift, fs, simc, t_long=t_long, burn_in=burn_in,
        sample_every=float(cfg.get("sample_every", 0.05)),
        quad_tol=float(cfg.get("quad_tol", 1e-6)))
    k_str = _k_label(ctx.root)
    rows, min_slack = [], math.inf
    for r in lib_rows:
        is_quad = r.route.startswith("quadrature")
        se = None if is_quad else r.tolerance / 3.0
        slack = r.tolerance - abs(r.value - r.reference)
        min_slack = min(min_slack, slack)
        rows.append(("invariant-measure", ctx.root.label, k_str,
                     drift.c_float, t_long, None,
                     f"{r.f_name} [{r.route}]", r.value, se, r.reference,
                     slack, r.passed))
    ok = all(r.passed for r in lib_rows)
    return {
        "verdict": "pass" if ok else "fail",
        "csv": (_CSV_NAME["invariant-measure"], FD_HEADER, rows),
        "margins": {"min_slack": min_slack},
        "hypotheses": items, "notes": notes,
        "details": {"eta": eta, "gamma": gamma, "t_long": t_long,
                    "burn_in": burn_in, "n_observables": len(fs)},
        "line": f"{len(rows)} route checks on {len(fs)} observables, "
                f"min slack {_cell(min_slack)}",
    }


def _run_lattice_sim(cfg: dict, seed: int) -> dict:
    spec = _lattice_model(cfg["lattice"])
    simc = _sim_config(cfg, seed)
    items, notes, consts, audit = _lattice_hypotheses(
        spec, seed, int(cfg.get("audit_probes", 200)))
    f = _lattice_observable(cfg.get("observable"), spec)
    omega0 = _window_config(cfg.get("omega0"), spec)
    t_grid = [float(t) for t in cfg["t_grid"]]
    ests = estimate_window_pt(spec, f, omega0, t_grid, simc)
    rows = [(e.t, e.quantity, e.mean, e.std_error, e.n_flagged) for e in ests]
    ok = all(not e.unreliable for e in ests)
    max_se = max(e.std_error for e in ests)
    return {
        "verdict": "pass" if ok else "inconclusive",
        "csv": (_CSV_NAME["lattice-sim"],
                ["t", "quantity", "estimate", "std_error", "n_flagged"], rows),
        "margins": {"max_std_error": max_se,
                    "n_flagged": ests[-1].n_flagged},
        "hypotheses": items, "notes": notes,
        "details": {"constants": asdict(consts),
                    "audit": asdict(audit),
                    "n_window": spec.n_window,
                    "n_replicas": simc.n_replicas},
        "line": f"{len(rows)} estimates of {ests[0].quantity} over "
                f"{spec.n_window} sites, max std error {_cell(max_se)}",
    }


def _run_cauchy(cfg: dict, seed: int) -> dict:
    radii = sorted(int(r) for r in cfg["box_radii"])
    if len(set(radii)) != len(radii):
        raise _ConfigError("box_radii must be distinct")
    spec = _lattice_model(cfg["lattice"], box_override=max(radii))
    simc = _sim_config(cfg, seed)
    items, notes, consts, _ = _lattice_hypotheses(
        spec, seed, int(cfg.get("audit_probes", 200)))
    f = _lattice_observable(cfg.get("observable"), spec)
    rep = cauchy_convergence_test(spec, f, float(cfg["t"]), radii, simc,
                                  n_probes=int(cfg.get("n_probes", 3)))
    rows = [(r.radius_small, r.radius_large, r.n_tilde, r.d_n, r.std_error,
             r.exact_zero) for r in rep.rows]
    verdict = {"pass": "pass", "decoupled-exact": "pass", "fail": "fail",
               "inconclusive": "inconclusive"}[rep.verdict]
    return {
        "verdict": verdict,
        "csv": (_CSV_NAME["cauchy"],
                ["radius_small", "radius_large", "n_tilde", "d_n",
                 "std_error", "exact_zero"], rows),
        "margins": {"slope": rep.slope, "slope_se": rep.slope_se},
        "hypotheses": items, "notes": notes,
        "details": {"verdict_detail": rep.verdict,
                    "decreasing": rep.decreasing,
                    "all_exact_zero": rep.all_exact_zero, "t": rep.t,
                    "constants": asdict(consts)},
        "line": f"{len(rows)} truncation pairs, verdict {rep.verdict}, "
                f"log-slope {_cell(rep.slope)}",
    }


def _run_finite_speed(cfg: dict, seed: int) -> dict:
    spec = _lattice_model(cfg["lattice"])
    simc = _sim_config(cfg, seed)
    items, notes, consts, _ = _lattice_hypotheses(
        spec, seed, int(cfg.get("audit_probes", 200)))
    f = _lattice_observable(cfg.get("observable"), spec)
    sites = [tuple(int(v) for v in s) for s in cfg["sites"]]
    for site in sites:
        if len(site) != spec.d:
            raise _ConfigError(f"site {site} is not a Z^{spec.d} site")
        if site not in spec.site_index:
            raise _ConfigError(f"site {site} lies outside the window")
    eps_split = cfg.get("eps_split")
    rep = finite_speed_test(spec, f, sites, float(cfg["s"]), simc,
                            h=float(cfg.get("h", 1e-3)),
                            n_probes=int(cfg.get("n_probes", 2)),
                            eps_split=(float(eps_split)
                                       if eps_split is not None else None))
    rows = [(r.site, r.distance, r.n_l, r.gamma_est, r.std_error, r.envelope)
            for r in rep.rows]
    if rep.passed:
        verdict = "pass"
    elif not rep.below_envelope:
        verdict = "fail"
    elif (math.isfinite(rep.fitted_ratio)
          and rep.fitted_ratio - 3.0 * rep.ratio_se > 1.0):
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return {
        "verdict": verdict,
        "csv": (_CSV_NAME["finite-speed"],
                ["site", "distance", "N_l", "gamma_tilde_est", "std_error",
                 "envelope"], rows),
        "margins": {"fitted_ratio": rep.fitted_ratio,
                    "ratio_se": rep.ratio_se, "sigma": rep.sigma,
                    "gamma_f_sup": rep.gamma_f_sup},
        "hypotheses": items, "notes": notes,
        "details": {"strictly_decreasing": rep.strictly_decreasing,
                    "ratio_ok": rep.ratio_ok,
                    "below_envelope": rep.below_envelope,
                    "tau": rep.tau, "s": rep.s, "n_flagged": rep.n_flagged,
                    "constants": asdict(rep.constants),
                    "rows": [{"site": list(r.site),
                              "gamma_plug": r.gamma_est,
                              "gamma_debiased": r.gamma_debiased,
                              "floor": r.floor,
                              "noise_floor": r.noise_floor}
                             for r in rep.rows]},
        "line": f"{len(rows)} profile sites, fitted ratio "
                f"{_cell(rep.fitted_ratio)}, sigma {_cell(rep.sigma)}",
    }


def _run_ergodicity(cfg: dict, seed: int) -> dict:
    spec = _lattice_model(cfg["lattice"])
    simc = _sim_config(cfg, seed)
    items, notes, consts, _ = _lattice_hypotheses(
        spec, seed, int(cfg.get("audit_probes", 200)))
    f = _lattice_observable(cfg.get("observable"), spec)
    omega = _window_config(cfg["omega0"], spec)
    omega_p = _window_config(cfg["omega0_prime"], spec)
    t_grid = [float(t) for t in cfg["t_grid"]]
    rep = ergodicity_test(spec, f, omega, omega_p, t_grid, simc)
    rows = [(t, delta, se) for (t, delta, se) in rep.rows]
    if rep.identical:
        all_zero = all(delta == 0.0 for (_, delta, _) in rep.rows)
        verdict = "pass" if all_zero else "fail"
    elif rep.passed:
        verdict = "pass"
    elif (math.isfinite(rep.rate)
          and rep.rate - 3.0 * rep.rate_se > 0.0):
        verdict = "fail"
    else:
        verdict = "inconclusive"
    details = {"identical": rep.identical, "ergodic_mode": rep.ergodic_mode,
               "c_omega": rep.c_omega, "c_omega_prime": rep.c_omega_prime,
               "n_flagged": rep.n_flagged, "constants": asdict(consts)}
    if spec.interaction.eps0 == 0.0 and spec.N == 1:
        details["decoupled_rate"] = decoupled_rate_1d(spec)
    return {
        "verdict": verdict,
        "csv": (_CSV_NAME["ergodicity"], ["t", "delta", "std_error"], rows),
        "margins": {"rate": rep.rate, "rate_se": rep.rate_se},
        "hypotheses": items, "notes": notes, "details": details,
        "line": f"{len(rows)} checkpoints, fitted rate {_cell(rep.rate)}",
    }


_RUNNERS = {
    "calculus-check": _run_calculus_check,
    "fd-sim": _run_fd_sim,
    "gradient-bound": _run_gradient_bound,
    "lyapunov": _run_lyapunov,
    "invariant-measure": _run_invariant_measure,
    "lattice-sim": _run_lattice_sim,
    "cauchy": _run_cauchy,
    "finite-speed": _run_finite_speed,
    "ergodicity": _run_ergodicity,
}


# -- plumbing ----------------------------------------------------------------------


def _run(cmd: str, args) -> int:
    try:
        with open(args.config, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        print(f"dunkl-lab: cannot read config: {e}", file=sys.stderr)
        return 2
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        print(f"dunkl-lab: config is not valid JSON: {e}", file=sys.stderr)
        return 2
    validator = Draft202012Validator(SCHEMAS[cmd])
    errors = sorted(validator.iter_errors(cfg),
                    key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        print(f"dunkl-lab: config schema violation at {loc}: {err.message}",
              file=sys.stderr)
        return 2

    seed_cfg = cfg.get("seed")
    seed = args.seed if args.seed is not None else (seed_cfg or 0)
    out_dir = args.out or cfg.get("out", ".")
    try:
        result = _RUNNERS[cmd](cfg, int(seed))
    except _ConfigError as e:
        print(f"dunkl-lab: config error: {e}", file=sys.stderr)
        return 2
    except ConditionError as e:
        print(f"dunkl-lab: hypothesis audit failed: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as e:
        print(f"dunkl-lab: hypothesis audit failed: {e}", file=sys.stderr)
        return 3
    except ArithmeticError as e:
        print(f"dunkl-lab: run aborted: {e}", file=sys.stderr)
        return 1

    os.makedirs(out_dir, exist_ok=True)
    csv_name, header, rows = result["csv"]
    _write_csv(os.path.join(out_dir, csv_name), header, rows)
    hypotheses = result["hypotheses"]
    exploratory = any(item.get("status") == "warn"
                      for item in hypotheses.values())
    summary = {
        "experiment": cmd,
        "verdict": result["verdict"],
        "mode": "exploratory" if exploratory else "standard",
        "margins": result["margins"],
        "hypotheses": hypotheses,
        "seeds": {"config": seed_cfg, "effective": int(seed)},
        "versions": {"dunkl-lab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "outputs": {"results_csv": csv_name},
        "details": result.get("details", {}),
        "notes": result.get("notes", []),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        fh.write(json.dumps(_canon(summary), sort_keys=True, indent=2) + "\n")

    for note in result.get("notes", []):
        print(f"note: {note}")
    line = result.get("line", "")
    print(f"{cmd}: {result['verdict']}" + (f" | {line}" if line else ""))

    verdict = result["verdict"]
    if verdict == "pass":
        return 0
    if verdict == "inconclusive" and not bool(cfg.get("strict", False)):
        return 0
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dunkl-lab",
        description="Experiment runner for Dunkl-operator Markov dynamics: "
                    "exact identity suites, jump-diffusion semigroup "
                    "estimates, and lattice propagation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "calculus-check": "exact operator identities on random polynomials",
        "fd-sim": "Monte Carlo estimate of P_t f for one particle",
        "gradient-bound": "symmetrised gradient bound along the semigroup",
        "lyapunov": "coercivity bound and moment control (particle or lattice)",
        "invariant-measure": "stationarity of the Gaussian-weight measure",
        "lattice-sim": "truncated lattice semigroup estimates",
        "cauchy": "truncation differences across nested boxes",
        "finite-speed": "information front versus the decay envelope",
        "ergodicity": "coalescence of two initial lattice configurations",
    }
    for name in _RUNNERS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True,
                       help="path to the experiment config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="output directory (default: config 'out' or '.')")
    args = parser.parse_args(argv)
    return _run(args.command, args)


if __name__ == "__main__":
    raise SystemExit(main())
