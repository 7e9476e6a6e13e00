"""Dunkl operators on polynomials and the derived bilinear forms.

The difference quotient ``A_alpha f = (f - f o sigma_alpha) / <alpha, x>`` is a
polynomial whenever f is (the numerator vanishes on the reflecting hyperplane),
so every operator here is computed by exact division rather than by limits:

* ``dunkl_t``            T_i f = d_i f + sum_alpha k_alpha alpha_i A_alpha f
* ``dunkl_laplacian``    sum T_i^2, or the closed form
                         Lap f + sum 2 k_alpha (div(<grad f, alpha> - A_alpha f))
* ``carre_du_champ``     (1/2)(L(f^2) - 2 f L f) against |grad f|^2 + sum k (A f)^2
* ``gamma_l``            the drift-adjusted square field
* ``generator_decomposition``  diffusion + singular drift + reflection jumps

Everything symbolic runs in the root system's scalar mode; exact contexts give
literal zero residuals.  Pointwise (black box) versions used by the Monte Carlo
layer evaluate the same formulas with finite differences for the smooth part
and exact difference quotients for the reflection part.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math
from typing import Callable, List, Sequence

import numpy as np
from scipy.stats import qmc

from ._scalar import QSqrt2
from .poly import MultiPoly
from .root_system import RootSystemContext, reflection_matrix

__all__ = [
    "DunklContext", "DriftSpec", "ConditionReport", "GeneratorDecomposition",
    "eta_constant", "probe_points", "weight_at", "integrate_weighted_1d",
    "integrate_gaussian_weighted",
]


class ConditionError(ValueError):
    """A hypothesis audit failed; carries the witness point."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class ConditionReport:
    name: str
    passed: bool
    worst_value: float
    witness: tuple | None
    n_probes: int
    note: str = ""


class DunklContext:
    """Symbolic and pointwise Dunkl calculus bound to one root system."""

    def __init__(self, root_ctx: RootSystemContext):
        self.root = root_ctx
        self.n = root_ctx.n
        self.mode = root_ctx.scalar_mode
        self._sigma = [reflection_matrix(a, self.mode)
                       for a in root_ctx.positive_roots]

    # -- symbolic layer ------------------------------------------------------

    def _check_poly(self, f: MultiPoly):
        if f.n_vars != self.n:
            raise ValueError(f"polynomial has {f.n_vars} variables, context has {self.n}")
        if f.mode != self.mode:
            raise ValueError(f"polynomial mode {f.mode!r} does not match context "
                             f"mode {self.mode!r}")

    def poly_zero(self) -> MultiPoly:
        return MultiPoly.zero(self.n, self.mode)

    def poly_var(self, i: int) -> MultiPoly:
        return MultiPoly.variable(i, self.n, self.mode)

    def a_alpha(self, f: MultiPoly, idx: int) -> MultiPoly:
        """Difference quotient (f - f o sigma_alpha)/<alpha, x> for positive root idx."""
        self._check_poly(f)
        alpha = self.root.positive_roots[idx]
        return (f - f.compose_linear(self._sigma[idx])).divide_by_linear_form(alpha)

    def a_alpha_all(self, f: MultiPoly) -> List[MultiPoly]:
        return [self.a_alpha(f, i) for i in range(len(self.root.positive_roots))]

    def dunkl_t(self, f: MultiPoly, i: int, _aq: List[MultiPoly] | None = None
                ) -> MultiPoly:
        """Dunkl operator T_i; reduces to the plain partial derivative at k = 0."""
        self._check_poly(f)
        out = f.partial_derivative(i)
        aq = self.a_alpha_all(f) if _aq is None else _aq
        for alpha, k, q in zip(self.root.positive_roots, self.root.multiplicities, aq):
            coef = k * alpha[i]
            if self.mode == "float" and coef == 0.0:
                continue
            out = out + q.scale(coef)
        return out

    def dunkl_gradient(self, f: MultiPoly) -> List[MultiPoly]:
        aq = self.a_alpha_all(f)
        return [self.dunkl_t(f, i, aq) for i in range(self.n)]

    def dunkl_laplacian(self, f: MultiPoly, method: str = "sum_of_squares"
                        ) -> MultiPoly:
        """Dunkl Laplacian, either as sum of squared T_i or in closed form.

        The closed form adds, for each positive root, twice k_alpha times the
        exact quotient (<grad f, alpha> - A_alpha f)/<alpha, x>; the numerator
        vanishes on the hyperplane because A_alpha f restricts there to the
        alpha-directional derivative.
        """
        self._check_poly(f)
        if method == "sum_of_squares":
            grad = self.dunkl_gradient(f)
            out = self.poly_zero()
            for i, g in enumerate(grad):
                out = out + self.dunkl_t(g, i)
            return out
        if method == "closed_form":
            out = self.poly_zero()
            for i in range(self.n):
                out = out + f.partial_derivative(i).partial_derivative(i)
            grad = [f.partial_derivative(i) for i in range(self.n)]
            for idx, (alpha, k) in enumerate(zip(self.root.positive_roots,
                                                 self.root.multiplicities)):
                dir_deriv = self.poly_zero()
                for i in range(self.n):
                    dir_deriv = dir_deriv + grad[i].scale(alpha[i])
                num = dir_deriv - self.a_alpha(f, idx)
                out = out + num.divide_by_linear_form(alpha).scale(2 * k)
            return out
        raise ValueError(f"unknown method {method!r}")

    def leibniz_defect(self, f: MultiPoly, g: MultiPoly, i: int) -> MultiPoly:
        """T_i(fg) - f T_i(g) - g T_i(f): the failure of the product rule."""
        return self.dunkl_t(f * g, i) - f * self.dunkl_t(g, i) - g * self.dunkl_t(f, i)

    def leibniz_formula(self, f: MultiPoly, g: MultiPoly, i: int) -> MultiPoly:
        """Predicted defect: -sum_alpha k alpha_i A_alpha(f) (g - g o sigma_alpha)."""
        out = self.poly_zero()
        for idx, (alpha, k) in enumerate(zip(self.root.positive_roots,
                                             self.root.multiplicities)):
            coef = k * alpha[i]
            if self.mode == "float" and coef == 0.0:
                continue
            gdiff = g - g.compose_linear(self._sigma[idx])
            out = out - (self.a_alpha(f, idx) * gdiff).scale(coef)
        return out

    def carre_du_champ(self, f: MultiPoly, method: str = "closed_form") -> MultiPoly:
        """Square field of the Dunkl Laplacian.

        definition:   (1/2)(Delta_k(f^2) - 2 f Delta_k f)
        closed_form:  |grad f|^2 + sum_alpha k_alpha (A_alpha f)^2
        """
        self._check_poly(f)
        if method == "definition":
            lap_f2 = self.dunkl_laplacian(f * f, "closed_form")
            lap_f = self.dunkl_laplacian(f, "closed_form")
            return (lap_f2 - (f * lap_f).scale(2)).scale(_half(self.mode))
        if method == "closed_form":
            out = self.poly_zero()
            for i in range(self.n):
                d = f.partial_derivative(i)
                out = out + d * d
            for idx, k in enumerate(self.root.multiplicities):
                q = self.a_alpha(f, idx)
                out = out + (q * q).scale(k)
            return out
        raise ValueError(f"unknown method {method!r}")

    def gamma_l(self, f: MultiPoly, drift: "DriftSpec", method: str = "closed_form"
                ) -> MultiPoly:
        """Drift-adjusted square field for L = Delta_k + b . grad_k, b polynomial.

        closed_form: |grad f|^2
                     + sum_alpha k [ (A_alpha f)^2 - (1/2)(f - f o sigma) A_alpha(f) <alpha, b> ]
        definition:  (1/2)(L(f^2) - 2 f L f)
        Both are polynomials; they agree identically.
        """
        self._check_poly(f)
        b_polys = drift.poly_components(self.n, self.mode)
        if b_polys is None:
            raise ValueError("gamma_l needs a polynomial drift (linear kind)")
        if method == "definition":
            lf2 = self.apply_generator(f * f, drift)
            lf = self.apply_generator(f, drift)
            return (lf2 - (f * lf).scale(2)).scale(_half(self.mode))
        if method == "closed_form":
            out = self.poly_zero()
            for i in range(self.n):
                d = f.partial_derivative(i)
                out = out + d * d
            for idx, (alpha, k) in enumerate(zip(self.root.positive_roots,
                                                 self.root.multiplicities)):
                q = self.a_alpha(f, idx)
                out = out + (q * q).scale(k)
                ab = self.poly_zero()
                for i in range(self.n):
                    ab = ab + b_polys[i].scale(alpha[i])
                fdiff = f - f.compose_linear(self._sigma[idx])
                out = out - (fdiff * q * ab).scale(k * _half(self.mode))
            return out
        raise ValueError(f"unknown method {method!r}")

    def apply_generator(self, f: MultiPoly, drift: "DriftSpec") -> MultiPoly:
        """L f = Delta_k f + b . grad_k f for polynomial drift."""
        b_polys = drift.poly_components(self.n, self.mode)
        if b_polys is None:
            raise ValueError("apply_generator needs a polynomial drift")
        out = self.dunkl_laplacian(f, "closed_form")
        grad = self.dunkl_gradient(f)
        for i in range(self.n):
            out = out + b_polys[i] * grad[i]
        return out

    def compose_group(self, f: MultiPoly, g) -> MultiPoly:
        """f o g for a group element (matrix)."""
        return f.compose_linear(g)

    # -- pointwise layer (numpy, black-box functions) -------------------------

    def dunkl_gradient_at(self, f: Callable, x: np.ndarray, h: float = 1e-5,
                          grad: Callable | None = None) -> np.ndarray:
        """grad_k f at points x (..., n): central differences for the smooth
        part (or the supplied analytic gradient) plus exact difference quotients."""
        x = np.asarray(x, dtype=float)
        roots = self.root.pos_roots_np
        kv = self.root.k_np
        refl = self.root.reflections_np
        if grad is not None:
            smooth = np.asarray(grad(x), dtype=float)
        else:
            smooth = np.empty(x.shape)
            for i in range(self.n):
                e = np.zeros(self.n)
                e[i] = h
                smooth[..., i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
        fx = np.asarray(f(x), dtype=float)
        out = smooth.copy()
        ap = x @ roots.T
        for a in range(roots.shape[0]):
            sx = x @ refl[a].T
            quot = (fx - np.asarray(f(sx), dtype=float)) / ap[..., a]
            out += kv[a] * quot[..., None] * roots[a]
        return out

    def symmetrised_gradient_at(self, f: Callable, x: np.ndarray, h: float = 1e-5,
                                grad: Callable | None = None) -> np.ndarray:
        """Gamma-tilde(f)(x) = sum_{g in G} |grad_k f(g x)|^2 pointwise."""
        x = np.asarray(x, dtype=float)
        group = self.root.group_np
        total = np.zeros(x.shape[:-1])
        for g in group:
            gx = x @ g.T
            gk = self.dunkl_gradient_at(f, gx, h=h, grad=grad)
            total += np.sum(gk * gk, axis=-1)
        return total

    def symmetrised_gradient_poly(self, f: MultiPoly, x: np.ndarray) -> np.ndarray:
        """Gamma-tilde for a polynomial via the exact symbolic gradient."""
        x = np.asarray(x, dtype=float)
        grad = [g.to_float() for g in self.dunkl_gradient(f)]
        group = self.root.group_np
        total = np.zeros(x.shape[:-1])
        for g in group:
            gx = x @ g.T
            acc = np.zeros(x.shape[:-1])
            for gi in grad:
                flat = gx.reshape(-1, self.n)
                vals = np.array([gi.eval_float(p) for p in flat]).reshape(x.shape[:-1])
                acc += vals ** 2
            total += acc
        return total

    def a_alpha_via_integral(self, f: MultiPoly, idx: int, x: Sequence[float],
                             n_nodes: int = 48) -> float:
        """Representation of A_alpha f as the line integral of the directional
        derivative along the segment from x to sigma_alpha x (Gauss-Legendre)."""
        alpha = np.array([float(c) for c in self.root.positive_roots[idx]])
        x = np.asarray(x, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        t = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        ax = float(x @ alpha)
        pts = x[None, :] - t[:, None] * ax * alpha[None, :]
        grad = [f.partial_derivative(i).to_float() for i in range(self.n)]
        vals = np.zeros(len(t))
        for i in range(self.n):
            vals += alpha[i] * np.array([grad[i].eval_float(p) for p in pts])
        return float(w @ vals)


def _half(mode: str):
    return Fraction(1, 2) if mode == "exact" else 0.5


# -- drift specifications ----------------------------------------------------


class DriftSpec:
    """Drift field b for the generator Delta_k + b . grad_k.

    ``linear(c)`` is b(x) = -c x.  ``custom(fn, bounds)`` wraps a vectorised
    callable (arrays shaped (..., n) -> (..., n)) together with declared
    derivative bounds {"sup_partial_ii", "sup_offdiag", "sup_a_alpha"} used by
    eta_constant.  Custom drifts are audited by probing; linear drifts satisfy
    both hypotheses identically.
    """

    def __init__(self, kind: str, c=None, fn: Callable | None = None,
                 bounds: dict | None = None, name: str | None = None):
        self.kind = kind
        self.c = c
        self.fn = fn
        self.bounds = bounds
        self.name = name or kind

    @staticmethod
    def linear(c) -> "DriftSpec":
        if isinstance(c, float):
            c = Fraction(str(c))
        if c < 0:
            raise ValueError("linear drift needs c >= 0")
        return DriftSpec("linear", c=c, name=f"linear(c={c})")

    @staticmethod
    def custom(fn: Callable, bounds: dict, name: str = "custom") -> "DriftSpec":
        missing = {"sup_partial_ii", "sup_offdiag", "sup_a_alpha"} - set(bounds)
        if missing:
            raise ValueError(f"custom drift must declare bounds {sorted(missing)}")
        return DriftSpec("custom", fn=fn, bounds=dict(bounds), name=name)

    @staticmethod
    def perturbed_linear(c, e_fn: Callable, ratio_bound: float,
                         name: str = "perturbed-linear") -> "DriftSpec":
        """b(x) = -c x + e(x) with a bounded wall-aligned perturbation.

        ratio_bound declares sup over roots and states of <alpha, e(x)> /
        <alpha, x>; the caller guarantees this ratio lies in [0, ratio_bound]
        (so e vanishes on every reflecting hyperplane).  It must not exceed c,
        or the jump rates of the generator decomposition can turn negative.
        """
        if isinstance(c, float):
            c = Fraction(str(c))
        if c < 0:
            raise ValueError("perturbed-linear drift needs c >= 0")
        if not 0 <= ratio_bound <= float(c):
            raise ValueError("perturbation ratio bound must lie in [0, c]")
        return DriftSpec("perturbed_linear", c=c, fn=e_fn,
                         bounds={"ratio_bound": float(ratio_bound)}, name=name)

    @property
    def c_float(self) -> float:
        return float(self.c)

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return -float(self.c) * x
        if self.kind == "perturbed_linear":
            return -float(self.c) * x + np.asarray(self.fn(x), dtype=float)
        return np.asarray(self.fn(x), dtype=float)

    def eval_perturbation(self, x: np.ndarray) -> np.ndarray:
        """The non-linear remainder e(x) = b(x) + c x (zero for pure linear)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return np.zeros_like(x)
        if self.kind == "perturbed_linear":
            return np.asarray(self.fn(x), dtype=float)
        raise ValueError("custom drifts have no declared linear part")

    def poly_components(self, n: int, mode: str) -> List[MultiPoly] | None:
        if self.kind != "linear":
            return None
        c = self.c if mode == "exact" else float(self.c)
        return [MultiPoly.variable(i, n, mode).scale(-1 * c) for i in range(n)]

    # hypothesis audits -------------------------------------------------------

    def audit_equivariance(self, ctx: DunklContext, n_probes: int = 2000,
                           seed: int = 0) -> ConditionReport:
        """b(g x) = g b(x) for every group element (exact for linear drifts)."""
        if self.kind == "linear":
            return ConditionReport("g-equivariance", True, 0.0, None, 0,
                                   "linear drift commutes with the group exactly")
        pts = probe_points(ctx.root, n_probes, seed=seed)
        group = ctx.root.group_np
        worst = 0.0
        witness = None
        bx = self.eval(pts)
        for g in group:
            lhs = self.eval(pts @ g.T)
            rhs = bx @ g.T
            err = np.max(np.abs(lhs - rhs), axis=-1)
            j = int(np.argmax(err))
            if err[j] > worst:
                worst = float(err[j])
                witness = tuple(pts[j])
        passed = worst <= 1e-9
        return ConditionReport("g-equivariance", passed, worst, witness, len(pts))

    def audit_rate_condition(self, ctx: DunklContext, n_probes: int = 10_000,
                             seed: int = 0) -> ConditionReport:
        """2/<alpha,x>^2 - <b(x),alpha>/<alpha,x> >= 0 on the probe cloud.

        This is exactly nonnegativity of the jump rates of the decomposition.
        """
        if self.kind == "linear":
            return ConditionReport("rate-condition", True, float(self.c), None, 0,
                                   "2/<a,x>^2 + c > 0 identically for b = -c x")
        pts = probe_points(ctx.root, n_probes, seed=seed, near_hyperplane=True)
        roots = ctx.root.pos_roots_np
        ap = pts @ roots.T
        bp = self.eval(pts) @ roots.T
        vals = 2.0 / ap ** 2 - bp / ap
        worst = float(np.min(vals))
        j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        passed = worst >= -1e-9
        return ConditionReport("rate-condition", passed, worst,
                               tuple(pts[j[0]]), pts.shape[0])

    def validate(self, ctx: DunklContext, seed: int = 0) -> List[ConditionReport]:
        reports = [self.audit_equivariance(ctx, seed=seed),
                   self.audit_rate_condition(ctx, seed=seed)]
        for r in reports:
            if not r.passed:
                raise ConditionError(
                    f"drift {self.name} fails {r.name}: worst {r.worst_value:.3e} "
                    f"at {r.witness}", witness=r.witness)
        return reports


def eta_constant(drift: DriftSpec, ctx: DunklContext):
    """Contraction constant of the symmetrised gradient bound:

        eta = max_i sup d_i b_i + (n-1) max_{i!=j} ||d_j b_i||_inf
              + sqrt(2) gamma max_alpha ||A_alpha b||_inf.

    Linear drifts give eta = -c + 2 c gamma exactly (Fraction when possible);
    custom drifts use their declared bounds.
    """
    gamma = ctx.root.gamma
    if drift.kind == "linear":
        c = drift.c
        if isinstance(gamma, QSqrt2) and gamma.is_rational():
            return c * (2 * gamma.as_fraction() - 1)
        return float(c) * (2 * float(gamma) - 1)
    if drift.kind == "perturbed_linear":
        raise ValueError("perturbed-linear drifts are scored by the lattice "
                         "constants, not by the single-particle eta")
    b = drift.bounds
    return (float(b["sup_partial_ii"])
            + (ctx.n - 1) * float(b["sup_offdiag"])
            + math.sqrt(2) * float(gamma) * float(b["sup_a_alpha"]))


# -- generator decomposition ---------------------------------------------------


class GeneratorDecomposition:
    """L = Delta + mu . grad + reflection jumps, the form the sampler integrates.

    mu(x)      = b(x) + sum_alpha 2 k_alpha alpha / <alpha, x>
    lambda_a(x) = k_alpha ( 2/<alpha,x>^2 - <b(x), alpha>/<alpha,x> )

    with jump target sigma_alpha x and unit diffusion matrix on Delta (the
    sampler uses Gaussian increments of variance 2 dt per coordinate).
    """

    def __init__(self, ctx: DunklContext, drift: DriftSpec):
        self.ctx = ctx
        self.drift = drift
        root = ctx.root if ctx.root.scalar_mode == "float" else ctx.root.to_float()
        self._roots = root.pos_roots_np
        self._k = root.k_np
        self._refl = root.reflections_np

    def mu_at(self, x: np.ndarray, ap: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if ap is None:
            ap = x @ self._roots.T
        out = self.drift.eval(x)
        out = out + (2.0 * self._k / ap) @ self._roots
        return out

    def rates_at(self, x: np.ndarray, ap: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if ap is None:
            ap = x @ self._roots.T
        bp = self.drift.eval(x) @ self._roots.T
        return self._k * (2.0 / ap ** 2 - bp / ap)

    def rates_nonnegative(self, pts: np.ndarray) -> ConditionReport:
        rates = self.rates_at(pts)
        worst = float(np.min(rates))
        j = int(np.argmin(np.min(rates, axis=-1)))
        return ConditionReport("jump-rate-nonnegativity", worst >= -1e-9, worst,
                               tuple(np.asarray(pts)[j]), len(pts))

    def apply_symbolic(self, f: MultiPoly) -> MultiPoly:
        """Apply the decomposition to a polynomial, reassembled exactly:

        Delta f + b.grad f + sum_alpha k [ 2 (<grad f,alpha> - A_alpha f)/<alpha,x>
                                           + <b,alpha> A_alpha f ].
        """
        ctx = self.ctx
        b_polys = self.drift.poly_components(ctx.n, ctx.mode)
        if b_polys is None:
            raise ValueError("symbolic decomposition needs a polynomial drift")
        out = ctx.poly_zero()
        grad = [f.partial_derivative(i) for i in range(ctx.n)]
        for i in range(ctx.n):
            out = out + grad[i].partial_derivative(i)
            out = out + b_polys[i] * grad[i]
        for idx, (alpha, k) in enumerate(zip(ctx.root.positive_roots,
                                             ctx.root.multiplicities)):
            dir_deriv = ctx.poly_zero()
            ab = ctx.poly_zero()
            for i in range(ctx.n):
                dir_deriv = dir_deriv + grad[i].scale(alpha[i])
                ab = ab + b_polys[i].scale(alpha[i])
            q = ctx.a_alpha(f, idx)
            out = out + (dir_deriv - q).divide_by_linear_form(alpha).scale(2 * k)
            out = out + (ab * q).scale(k)
        return out

    def identity_residual(self, f: MultiPoly) -> MultiPoly:
        """L f via Dunkl operators minus L f via the decomposition (zero iff equal)."""
        return self.ctx.apply_generator(f, self.drift) - self.apply_symbolic(f)


# -- probes, weight and quadrature ---------------------------------------------


def probe_points(root_ctx: RootSystemContext, n: int = 10_000, radius: float = 20.0,
                 seed: int = 0, near_hyperplane: bool = False,
                 hyperplane_offset: float = 1e-3, min_gap: float = 1e-4
                 ) -> np.ndarray:
    """Deterministic quasi-random probe cloud in the ball of the given radius.

    Halton points in the cube are filtered to the ball and pushed at least
    min_gap away from every reflecting hyperplane (so difference quotients are
    well defined); with near_hyperplane=True, points at signed distance
    hyperplane_offset from each hyperplane are appended to exercise the
    singular region.
    """
    nd = root_ctx.n
    sampler = qmc.Halton(d=nd, scramble=True, seed=seed)
    pts: list[np.ndarray] = []
    roots = root_ctx.pos_roots_np
    need = n
    while need > 0:
        raw = sampler.random(max(2 * need, 64))
        cand = radius * (2.0 * raw - 1.0)
        cand = cand[np.linalg.norm(cand, axis=1) <= radius]
        ap = cand @ roots.T  # |<alpha,x>| = sqrt(2) * distance to hyperplane
        cand = cand[np.min(np.abs(ap), axis=1) > min_gap * math.sqrt(2)]
        take = cand[:need]
        pts.append(take)
        need -= len(take)
    cloud = np.concatenate(pts, axis=0)
    if near_hyperplane:
        base = cloud[: min(len(cloud), 4 * len(roots))]
        extra = []
        for a in range(len(roots)):
            alpha = roots[a]
            proj = base - 0.5 * np.outer(base @ alpha, alpha)
            for sgn in (1.0, -1.0):
                shifted = proj + sgn * hyperplane_offset * alpha / math.sqrt(2.0)
                ap = shifted @ roots.T
                ok = np.min(np.abs(ap), axis=1) > 1e-9
                extra.append(shifted[ok])
        cloud = np.concatenate([cloud] + extra, axis=0)
    return cloud


def weight_at(root_ctx: RootSystemContext, x: np.ndarray) -> np.ndarray:
    """Reflection-invariant weight prod |<alpha, x>|^(2 k_alpha) (homogeneous of
    degree twice the multiplicity sum)."""
    x = np.asarray(x, dtype=float)
    ap = np.abs(x @ root_ctx.pos_roots_np.T)
    return np.prod(ap ** (2.0 * root_ctx.k_np), axis=-1)


def integrate_weighted_1d(root_ctx: RootSystemContext, g: Callable,
                          tol: float = 1e-11) -> float:
    """integral of g(x) w_k(x) over the line (g must decay; the interval is
    split at the origin so the weight's zero sits at an endpoint)."""
    from scipy.integrate import quad

    if root_ctx.n != 1:
        raise ValueError("integrate_weighted_1d needs a rank-one ambient space")

    def h(t):
        return float(g(t)) * float(weight_at(root_ctx, np.array([[t]]))[0])

    # quadpack refuses interior breakpoints on infinite intervals
    neg, err_n = quad(h, -np.inf, 0.0, limit=400, epsabs=tol, epsrel=tol)
    pos, err_p = quad(h, 0.0, np.inf, limit=400, epsabs=tol, epsrel=tol)
    val, err = neg + pos, err_n + err_p
    if err > max(tol * 100, 1e-8 * max(1.0, abs(val))):
        raise ArithmeticError(f"1d quadrature did not converge: err={err:.2e}")
    return val


def integrate_gaussian_weighted(root_ctx: RootSystemContext, g: Callable,
                                c: float, tol: float = 1e-10) -> float:
    """integral of g(x) exp(-c|x|^2/2) w_k(x) dx over R^n for n in {1, 2}.

    n = 2 uses a nested adaptive rule; singular lines of the weight are passed
    to the inner integrator as breakpoints.  Integrands without the Gaussian
    damping are refused (c must be positive).
    """
    from scipy.integrate import quad

    if c <= 0:
        raise ValueError("Gaussian damping c must be positive; pure weighted "
                         "integrals over the whole space are refused")
    n = root_ctx.n
    L = math.sqrt(2 * 700.0 / c)
    roots = root_ctx.pos_roots_np
    if n == 1:
        def h(t):
            x = np.array([t])
            return float(g(x)) * math.exp(-0.5 * c * t * t) * \
                float(weight_at(root_ctx, x[None, :])[0])
        val, err = quad(h, -L, L, points=[0.0], limit=400, epsabs=tol, epsrel=tol)
        return val
    if n != 2:
        raise ValueError("quadrature route supports n <= 2 only")

    def inner(x2):
        cuts = set()
        for a in roots:
            if abs(a[0]) > 1e-12:
                t = -a[1] * x2 / a[0]
                if -L < t < L:
                    cuts.add(round(float(t), 14))
        pts = sorted(cuts)

        def h(x1):
            x = np.array([x1, x2])
            return float(g(x)) * math.exp(-0.5 * c * (x1 * x1 + x2 * x2)) * \
                float(weight_at(root_ctx, x[None, :])[0])

        val, _ = quad(h, -L, L, points=pts or None, limit=200,
                      epsabs=tol, epsrel=tol)
        return val

    val, err = quad(inner, -L, L, points=[0.0], limit=200,
                    epsabs=tol * 10, epsrel=tol * 10)
    return val
