"""Jump-diffusion sampler for the semigroup generated by Delta_k + b . grad_k.

The generator splits into a Euclidean diffusion with the singular drift
``mu(x) = b(x) + sum_alpha 2 k_alpha alpha / <alpha, x>`` plus reflection jumps
``x -> sigma_alpha x`` at state-dependent rate
``lambda_alpha(x) = k_alpha (2/<alpha,x>^2 - <b(x),alpha>/<alpha,x>)``.

Bulk scheme: tamed Euler (drift displacement clamped to ``delta_max``) with
jump thinning, at most one jump per substep, and adaptive substeps chosen so
the total jump probability per substep never exceeds ``p_max``.

Wall regime: for multiplicities below 1/2 the process genuinely reaches the
reflecting hyperplanes (the wall-normal coordinate is a Bessel-type process of
dimension 2k+1 < 2), so thinning alone needs unboundedly small substeps there.
For linear drift b = -c x the wall-normal coordinate u = <alpha, x> is handled
by an exact transition instead: u follows a rank-one dynamic whose squared
radial part is an exactly sampled noncentral chi-square (squared Bessel of
dimension 2k+1 through a Lamperti space-time change), and the sign is resolved
by the closed-form crossing probability

    P(sign flip | radii) = (1 - I_{k+1/2}(zeta) / I_{k-1/2}(zeta)) / 2,

zeta = |u_0| |u_heat| / (2 s), plus an independent parity for the extra
constant-rate flips contributed by the -c x . grad_k drift term.  (Sanity
anchor: at k = 0 the I-ratio is tanh(zeta) and the formula reduces to the
Brownian conditional sign probability 1/(e^{2 zeta} + 1).)  In rank one this
makes the step exact; in higher rank the perpendicular component takes a tamed
Euler step with the singular part projected out, and the cross terms are
frozen over the substep.  Replicas are flagged only when no exact channel
applies (custom drift near a wall, or two walls at once) or the substep cap
is exhausted; flagged replicas are excluded and counted, and estimates are
marked unreliable above 1% flagged.

Randomness: a counter-based Philox stream keyed by (seed, stream tag) supplies
one (n_replicas, n) block of normals and one block of uniforms per substep,
with replicas reading fixed rows, shared across all coupled initial points;
the substep schedule is unified across coupled points, so common random
numbers pair paths exactly.  Wall transitions draw from a second Philox stream
keyed by (seed, tag | wall bit) so they never shift the main stream's
alignment.  A rerun with the same (seed, config) is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import os
import warnings
from typing import Callable, List, Sequence

import numpy as np
from scipy.special import ive

from .calculus import ConditionError, DunklContext, DriftSpec, GeneratorDecomposition
from .poly import MultiPoly

__all__ = [
    "SimConfig", "EnsembleEstimate", "ParticleDynamics", "simulate_coupled",
    "rank1_exact_transition", "estimate_pt", "GradientStencil",
    "estimate_dunkl_gradient_pt", "estimate_symmetrised_gradient_pt",
    "verify_gradient_bound", "GradientBoundRow", "LyapunovSpec",
    "LyapunovReport", "verify_lyapunov", "InvariantMeasureRow",
    "verify_invariant_measure", "stream_for", "encode_site", "thread_map",
    "chi", "chi_derivatives",
]

UNRELIABLE_FLAG_FRACTION = 0.01
WALL_CHANNEL_BIT = 1 << 63
SITE_CHANNEL_BIT = 1 << 62
_AP_GUARD = 1e-30
_WALL_TRIGGER = 1.0  # engage the exact wall channel whenever thinning could
                     # not cover the remaining interval in a single substep


def encode_site(site: Sequence[int] = ()) -> int:
    """Pack a lattice coordinate into a 64-bit stream tag (10 bits per axis,
    offset 512, up to 6 axes).  The empty tuple (single-particle runs) maps
    to 0; bit 62 marks real sites so (0, 0) and the default never collide."""
    tag = 0
    if len(site) > 6:
        raise ValueError("stream tags support at most 6 lattice axes")
    for i, c in enumerate(site):
        c = int(c)
        if not -512 <= c < 512:
            raise ValueError(f"site coordinate {c} out of the +-511 tag range")
        tag |= (c + 512) << (10 * i)
    if len(site):
        tag |= SITE_CHANNEL_BIT
    return tag


def stream_for(seed: int, tag: int = 0) -> np.random.Generator:
    """Counter-based stream: Philox keyed by (seed, tag)."""
    key = np.array([np.uint64(seed), np.uint64(tag)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def thread_map(fn: Callable, items: Sequence) -> list:
    """Map over independent tasks on a small thread pool.

    Worker count comes from DUNKL_LAB_THREADS (default: min(4, cpu count)).
    Results are collected by index, so scheduling cannot affect output.
    """
    n_env = os.environ.get("DUNKL_LAB_THREADS")
    workers = int(n_env) if n_env else min(4, os.cpu_count() or 1)
    workers = max(1, workers)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SimConfig:
    """Discretisation and ensemble parameters for the jump-diffusion sampler."""

    dt: float = 1e-3
    n_replicas: int = 10_000
    seed: int = 0
    p_max: float = 0.1
    delta_max: float = 1.0
    eps_hyp: float = 1e-6
    min_substep_factor: float = 1e-6
    substep_cap: int = 500

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.p_max <= 0.5:
            raise ValueError("p_max must lie in (0, 0.5]")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")
        if self.n_replicas < 1:
            raise ValueError("need at least one replica")


@dataclass
class EnsembleEstimate:
    mean: float
    std_error: float
    n_replicas: int
    n_flagged: int
    t: float
    x0: tuple
    quantity: str = ""

    @property
    def unreliable(self) -> bool:
        return self.n_flagged > UNRELIABLE_FLAG_FRACTION * self.n_replicas


class ParticleDynamics:
    """Drift and jump-rate evaluator for one particle in R^n."""

    def __init__(self, ctx: DunklContext, drift: DriftSpec):
        root = ctx.root if ctx.root.scalar_mode == "float" else ctx.root.to_float()
        self.roots = root.pos_roots_np          # (nA, n)
        self.k = root.k_np                      # (nA,)
        self.reflections = root.reflections_np  # (nA, n, n)
        self.n = root.n
        self.drift = drift
        self.decomposition = GeneratorDecomposition(ctx, drift)
        # distinct positive multiplicities, for the wall channel's gamma blocks
        kp = sorted({float(v) for v in self.k if v > 0.0})
        self.k_pos_unique = np.array(kp)
        self.k_slot = np.array([kp.index(float(v)) if v > 0.0 else -1
                                for v in self.k], dtype=int)

    def quantities(self, x: np.ndarray):
        """(mu, rates) at states x (..., n); inner products are guarded so
        states pinned on a hyperplane produce huge-but-finite rates, which the
        stepper then routes to the wall channel (or a flag)."""
        ap = x @ self.roots.T
        ap = np.where(np.abs(ap) < _AP_GUARD,
                      np.where(ap < 0, -_AP_GUARD, _AP_GUARD), ap)
        b = self.drift.eval(x)
        bp = np.einsum("...n,an->...a", b, self.roots)
        inv = 1.0 / ap
        rates = self.k * (2.0 * inv * inv - bp * inv)
        mu = b + (2.0 * self.k * inv) @ self.roots
        return mu, rates

    def check_initial(self, x0: np.ndarray, eps_hyp: float):
        ap = np.abs(np.asarray(x0, dtype=float) @ self.roots.T)
        if ap.size and float(np.min(ap)) < eps_hyp:
            raise ValueError(
                f"initial state lies within {eps_hyp} of a reflecting hyperplane")


def _rank1_core(u0, dt, k, c: float, bounded_rate, g2k, z, uu):
    """Wall-normal transition from shared primitives.

    u solves du = (4k/u - cu) dt + 2 dW with sign flips at singular rate
    2k/u^2 plus the bounded rate ``bounded_rate`` (= k(c - <alpha,e>/<alpha,x>)
    for linear-plus-perturbation drift).  Lamperti map to the heat dynamic
    (time s = (e^{2c dt}-1)/c, space shrink e^{-c dt}); squared radial part
    from the dimension-(2k+1) squared-Bessel transition in additive form
    (z + sqrt(nc))^2 + 2 g2k with g2k ~ Gamma(k); sign from the closed-form
    crossing probability composed with the bounded-rate parity.  Using shared
    (g2k, z, uu) keeps coupled nearby points nearby: the map is continuous in
    u0 for fixed primitives.
    """
    if c > 1e-14:
        s = np.expm1(2.0 * c * dt) / c
    else:
        s = 2.0 * dt
    nc = u0 * u0 / (2.0 * s)
    y_heat = 2.0 * s * ((z + np.sqrt(nc)) ** 2 + 2.0 * g2k)
    zr = np.sqrt(y_heat)
    zeta = np.abs(u0) * zr / (2.0 * s)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = ive(k + 0.5, zeta) / ive(k - 0.5, zeta)
    ratio = np.nan_to_num(ratio, nan=0.0, posinf=1.0, neginf=0.0)
    p_cross = 0.5 * (1.0 - ratio)
    p_extra = 0.5 * (-np.expm1(-2.0 * bounded_rate * dt))
    p_flip = p_cross + p_extra - 2.0 * p_cross * p_extra
    sign = np.where(u0 >= 0.0, 1.0, -1.0)
    sign = np.where(uu < p_flip, -sign, sign)
    return sign * np.exp(-c * dt) * zr


def rank1_exact_transition(u0: np.ndarray, dt, k, c: float,
                           gen: np.random.Generator) -> np.ndarray:
    """Exact step of the one-dimensional reflection-invariant dynamic with
    multiplicity k and linear restoring drift -c u (see _rank1_core).
    Vectorised over u0; k and dt may be arrays.  Exact in distribution for
    every dt, including paths that reach the wall (k < 1/2).
    """
    u0 = np.asarray(u0, dtype=float)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), u0.shape).astype(float)
    k = np.broadcast_to(np.asarray(k, dtype=float), u0.shape).astype(float)
    g2k = gen.standard_gamma(k)
    z = gen.standard_normal(u0.shape)
    uu = gen.random(u0.shape)
    return _rank1_core(u0, dt, k, c, k * c, g2k, z, uu)


def _advance_block(x: np.ndarray, flags: np.ndarray, dt: float, cfg: SimConfig,
                   gen: np.random.Generator, dyn: ParticleDynamics,
                   wall_gen: np.random.Generator | None) -> None:
    """Advance an (n_points, n_replicas, n) block by one global step of length
    dt.  Coupled points share the noise block and the substep schedule; jump
    decisions reuse one uniform per replica (maximal coupling of the thinning).
    Mutates x and flags in place.
    """
    P, R, N = x.shape
    roots, kvec, refl = dyn.roots, dyn.k, dyn.reflections
    nA = roots.shape[0]
    wall_on = wall_gen is not None and nA > 0 and \
        dyn.drift.kind in ("linear", "perturbed_linear")
    perturbed = dyn.drift.kind == "perturbed_linear"
    c = float(dyn.drift.c) if wall_on else 0.0
    remaining = np.where(flags, 0.0, dt)
    min_sub = cfg.min_substep_factor * dt
    iteration = 0
    while True:
        active = remaining > 0.0
        if not active.any():
            break
        iteration += 1
        if iteration > cfg.substep_cap:
            flags |= active
            break
        mu, rates = dyn.quantities(x)
        live = active[None, :, None] & np.isfinite(rates)
        if rates.min(initial=0.0, where=live) < -1e-9:
            masked = np.where(live, rates, np.inf)
            p, r, a = np.unravel_index(int(np.argmin(masked)), masked.shape)
            raise ConditionError(
                f"negative jump rate {masked[p, r, a]:.3e} at state {x[p, r]}",
                witness=tuple(x[p, r]))
        lam_tot = rates.sum(axis=-1)                         # (P, R)
        with np.errstate(divide="ignore"):
            cand_tot = np.where(lam_tot > 0.0,
                                cfg.p_max / np.maximum(lam_tot, 1e-300), np.inf)
        if wall_on:
            dom_idx = np.argmax(rates, axis=-1)              # (P, R)
            lam_dom = np.take_along_axis(rates, dom_idx[..., None], -1)[..., 0]
            lam_rest = lam_tot - lam_dom
            wall_pt = active[None, :] & (cand_tot < _WALL_TRIGGER * remaining[None, :])
            with np.errstate(divide="ignore"):
                cand_rest = np.where(lam_rest > 0.0,
                                     cfg.p_max / np.maximum(lam_rest, 1e-300),
                                     np.inf)
            demand = np.where(wall_pt, cand_rest, cand_tot)
        else:
            wall_pt = None
            demand = cand_tot
        dt_sub = np.minimum(remaining, demand.min(axis=0))   # (R,)
        newly = active & (dt_sub < min_sub)
        if newly.any():
            flags |= newly
            remaining[newly] = 0.0
        act = active & ~newly
        dt_eff = np.where(act, dt_sub, 0.0)

        noise = gen.standard_normal((R, N))
        u = gen.random(R)

        disp = mu * dt_eff[None, :, None]
        nrm = np.sqrt(np.sum(disp * disp, axis=-1, keepdims=True))
        disp *= np.minimum(1.0, cfg.delta_max / np.maximum(nrm, 1e-300))
        y = x + disp + np.sqrt(2.0 * dt_eff)[None, :, None] * noise[None, :, :]

        thin = rates
        if wall_on and wall_pt.any():
            # the dominant root of a wall point is resolved exactly, not thinned
            drop = wall_pt[..., None] & (np.arange(nA) == dom_idx[..., None])
            thin = np.where(drop, 0.0, rates)
        thresh = np.cumsum(thin, axis=-1) * dt_eff[None, :, None]
        jumped = u[None, :, None] < thresh
        any_jump = jumped[..., -1] & act[None, :]

        if wall_on:
            wact = wall_pt & act[None, :]
            if wact.any():
                # shared primitives: one block per distinct multiplicity, one
                # normal and one uniform block, indexed by replica, so coupled
                # points and matched-seed runs stay aligned
                gam = np.stack([wall_gen.standard_gamma(kv, R)
                                for kv in dyn.k_pos_unique])
                z_w = wall_gen.standard_normal(R)
                u_w = wall_gen.random(R)
                pj, rj = np.nonzero(wact)
                ai = dom_idx[pj, rj]
                al = roots[ai]                               # (m, n)
                ka = kvec[ai]
                dtw = dt_eff[rj]
                u0 = np.einsum("mn,mn->m", x[pj, rj], al)
                if perturbed:
                    # evaluate on the full block so drifts carrying per-row
                    # coefficients broadcast, then select the wall rows
                    e_val = np.broadcast_to(
                        dyn.drift.eval_perturbation(x), x.shape)[pj, rj]
                    e_alpha = np.einsum("mn,mn->m", e_val, al)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        g_ratio = np.where(u0 != 0.0, e_alpha / u0, 0.0)
                    g_ratio = np.clip(g_ratio, 0.0, c)
                    bounded_rate = ka * (c - g_ratio)
                else:
                    e_alpha = 0.0
                    bounded_rate = ka * c
                u_new = _rank1_core(u0, dtw, ka, c, bounded_rate,
                                    gam[dyn.k_slot[ai], rj], z_w[rj], u_w[rj])
                if perturbed:
                    u_new = u_new + e_alpha * dtw
                def _perp(v):
                    return v - 0.5 * np.einsum("mn,mn->m", v, al)[:, None] * al
                x_perp = _perp(x[pj, rj])
                mu_perp = _perp(mu[pj, rj])
                dsp = mu_perp * dtw[:, None]
                nr = np.sqrt(np.sum(dsp * dsp, axis=-1, keepdims=True))
                dsp *= np.minimum(1.0, cfg.delta_max / np.maximum(nr, 1e-300))
                xi_perp = _perp(noise[rj])
                y[pj, rj] = x_perp + dsp \
                    + np.sqrt(2.0 * dtw)[:, None] * xi_perp \
                    + 0.5 * u_new[:, None] * al

        if any_jump.any():
            idx = np.argmax(jumped, axis=-1)
            pj, rj = np.nonzero(any_jump)
            sel = refl[idx[pj, rj]]
            y[pj, rj] = np.einsum("kij,kj->ki", sel, y[pj, rj])

        x[...] = np.where(act[None, :, None], y, x)
        remaining = remaining - dt_eff


def _steps_for_grid(t_grid: Sequence[float], dt: float) -> List[int]:
    steps = []
    prev = 0.0
    for t in t_grid:
        if t < prev - 1e-12:
            raise ValueError("checkpoint times must be nondecreasing")
        n = round((t - prev) / dt)
        if abs(n * dt - (t - prev)) > 1e-9:
            raise ValueError(f"checkpoint {t} is not a multiple of dt={dt}")
        steps.append(n)
        prev = t
    return steps


def simulate_coupled(dyn: ParticleDynamics, x0_points: np.ndarray,
                     t_grid: Sequence[float], cfg: SimConfig,
                     stream_tag: int = 0):
    """Run all coupled initial points on a shared noise stream.

    x0_points: (P, n) initial states (may coincide; identical rows stay
    bit-identical).  Returns (states_per_checkpoint, flags): a list of
    (P, n_replicas, n) arrays aligned with t_grid, and the shared replica
    flag vector.
    """
    x0_points = np.atleast_2d(np.asarray(x0_points, dtype=float))
    P, N = x0_points.shape
    if N != dyn.n:
        raise ValueError("initial point dimension mismatch")
    dyn.check_initial(x0_points, cfg.eps_hyp)
    R = cfg.n_replicas
    gen = stream_for(cfg.seed, stream_tag)
    wall_gen = stream_for(cfg.seed, stream_tag | WALL_CHANNEL_BIT) \
        if dyn.drift.kind in ("linear", "perturbed_linear") else None
    x = np.repeat(x0_points[:, None, :], R, axis=1)
    flags = np.zeros(R, dtype=bool)
    out = []
    for n_steps in _steps_for_grid(t_grid, cfg.dt):
        for _ in range(n_steps):
            _advance_block(x, flags, cfg.dt, cfg, gen, dyn, wall_gen)
        out.append(x.copy())
    return out, flags


def _as_callable(f, n: int) -> Callable:
    """Vectorised (..., n) -> (...) evaluator from a callable or MultiPoly."""
    if isinstance(f, MultiPoly):
        terms = [(float(coeff), exps) for exps, coeff in f.to_float().terms.items()]
        def poly_eval(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[:-1])
            for coeff, exps in terms:
                term = np.full(x.shape[:-1], coeff)
                for i, e in enumerate(exps):
                    if e:
                        term = term * x[..., i] ** e
                out += term
            return out
        return poly_eval
    return f


def _masked_mean(values: np.ndarray, flags: np.ndarray):
    good = ~flags
    n_good = int(good.sum())
    if n_good == 0:
        raise ArithmeticError("all replicas flagged; no estimate available")
    v = values[..., good]
    mean = v.mean(axis=-1)
    if n_good > 1:
        se = v.std(axis=-1, ddof=1) / math.sqrt(n_good)
    else:
        se = np.zeros_like(mean)
    return mean, se, n_good


def estimate_pt(ctx: DunklContext, drift: DriftSpec, f, x0, t, cfg: SimConfig,
                stream_tag: int = 0, quantity: str = "P_t f"):
    """Monte Carlo estimate of P_t f(x0); t may be a scalar or a grid.

    Bounded f stays within ||f||_inf up to sampling error; f == 1 returns
    exactly 1 with zero standard error.  Flagged replicas are excluded and
    counted.
    """
    t_list = [float(t)] if np.isscalar(t) else [float(s) for s in t]
    dyn = ParticleDynamics(ctx, drift)
    fc = _as_callable(f, dyn.n)
    x0 = np.asarray(x0, dtype=float).reshape(1, dyn.n)
    states, flags = simulate_coupled(dyn, x0, t_list, cfg, stream_tag)
    out = []
    for tv, st in zip(t_list, states):
        vals = np.asarray(fc(st[0]), dtype=float)
        if not np.all(np.isfinite(vals[~flags])):
            raise ArithmeticError("observable returned non-finite values; "
                                  "is f bounded on the reachable region?")
        mean, se, n_good = _masked_mean(vals, flags)
        out.append(EnsembleEstimate(float(mean), float(se), cfg.n_replicas,
                                    int(flags.sum()), tv, tuple(x0[0]), quantity))
    return out[0] if np.isscalar(t) else out


# -- Dunkl gradient of P_t f via coupled stencils ------------------------------


class GradientStencil:
    """Point layout and linear combinations estimating grad_k(P_t f) at the
    group orbit of a base point.

    For each group element g the estimator of T_i(P_t f)(g x) is

        [Phat(gx + h e_i) - Phat(gx - h e_i)] / 2h
        + sum_alpha k alpha_i (Phat(gx) - Phat(sigma_alpha gx)) / <alpha, gx>

    and every Phat evaluation point is shared across the whole batch (the
    reflected points sigma_alpha g x coincide with other orbit points), so
    each estimator is one linear functional of the per-replica value matrix.
    """

    def __init__(self, ctx: DunklContext, x: np.ndarray, h: float,
                 include_group: bool = True):
        root = ctx.root if ctx.root.scalar_mode == "float" else ctx.root.to_float()
        self.ctx = ctx
        self.h = h
        self.n = root.n
        self.roots = root.pos_roots_np
        self.k = root.k_np
        self.refl = root.reflections_np
        group = root.group_np if include_group else np.eye(self.n)[None]
        x = np.asarray(x, dtype=float)

        self._points: list[np.ndarray] = []
        self._index: dict = {}
        self.bases = [g @ x for g in group]
        rows = []
        for gx in self.bases:
            base_i = self._point_index(gx)
            shift_idx = []
            for i in range(self.n):
                e = np.zeros(self.n)
                e[i] = h
                shift_idx.append((self._point_index(gx + e),
                                  self._point_index(gx - e)))
            refl_idx = [self._point_index(self.refl[a] @ gx)
                        for a in range(len(self.roots))]
            rows.append((base_i, shift_idx, refl_idx))
        self._rows = rows

    def _point_index(self, p: np.ndarray) -> int:
        key = tuple(np.round(p, 12) + 0.0)
        if key not in self._index:
            self._index[key] = len(self._points)
            self._points.append(np.asarray(p, dtype=float))
        return self._index[key]

    @property
    def points(self) -> np.ndarray:
        return np.array(self._points)

    def combo_matrix(self) -> np.ndarray:
        """(n_bases * n, n_points) matrix W with gradient estimates W @ Phat."""
        P = len(self._points)
        W = np.zeros((len(self._rows) * self.n, P))
        for gi, (base_i, shift_idx, refl_idx) in enumerate(self._rows):
            gx = self.bases[gi]
            ap = self.roots @ gx
            for i in range(self.n):
                row = W[gi * self.n + i]
                plus, minus = shift_idx[i]
                row[plus] += 1.0 / (2 * self.h)
                row[minus] -= 1.0 / (2 * self.h)
                for a in range(len(self.roots)):
                    coef = self.k[a] * self.roots[a, i] / ap[a]
                    row[base_i] += coef
                    row[refl_idx[a]] -= coef
        return W

    def fd_matrix(self) -> np.ndarray:
        """(n_bases * n, n_points) matrix of just the central-difference parts
        (used for the noise-floor audit)."""
        P = len(self._points)
        W = np.zeros((len(self._rows) * self.n, P))
        for gi, (_, shift_idx, _) in enumerate(self._rows):
            for i in range(self.n):
                plus, minus = shift_idx[i]
                W[gi * self.n + i, plus] += 1.0
                W[gi * self.n + i, minus] -= 1.0
        return W


def _combo_stats(W: np.ndarray, vals: np.ndarray, flags: np.ndarray):
    """Mean vector and covariance of W @ per-replica values, flags excluded."""
    good = ~flags
    n_good = int(good.sum())
    if n_good == 0:
        raise ArithmeticError("all replicas flagged; no estimate available")
    combos = W @ vals[:, good]
    est = combos.mean(axis=1)
    if n_good > 1:
        cov = np.atleast_2d(np.cov(combos, ddof=1)) / n_good
    else:
        cov = np.zeros((len(est), len(est)))
    return est, cov, n_good


def estimate_dunkl_gradient_pt(ctx: DunklContext, drift: DriftSpec, f,
                               x, t: float, cfg: SimConfig, h: float = 1e-3,
                               stream_tag: int = 0):
    """Estimate grad_k(P_t f)(x) by common-random-numbers stencils.

    Returns (gradient vector, per-component standard errors).  Warns when a
    finite-difference component sits below the Monte Carlo noise floor, with
    a recommended larger h.
    """
    dyn = ParticleDynamics(ctx, drift)
    fc = _as_callable(f, dyn.n)
    stencil = GradientStencil(ctx, np.asarray(x, dtype=float), h,
                              include_group=False)
    states, flags = simulate_coupled(dyn, stencil.points, [float(t)], cfg,
                                     stream_tag)
    vals = np.asarray(fc(states[0]), dtype=float)
    est, cov, _ = _combo_stats(stencil.combo_matrix(), vals, flags)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    fd_est, fd_cov, _ = _combo_stats(stencil.fd_matrix(), vals, flags)
    fd_se = np.sqrt(np.maximum(np.diag(fd_cov), 0.0))
    weak = np.abs(fd_est) < 3.0 * fd_se
    if weak.any() and fd_se.max() > 0:
        i = int(np.argmax(fd_se - np.abs(fd_est)))
        rec = h * math.sqrt(3.0 * fd_se[i] / max(abs(fd_est[i]), fd_se[i] * 1e-3))
        warnings.warn(
            f"finite-difference step h={h:g} is below the Monte Carlo noise "
            f"floor for component {i}; consider h ~ {rec:.2g} or more replicas",
            RuntimeWarning)
    return est, se


def estimate_symmetrised_gradient_pt(ctx: DunklContext, drift: DriftSpec, f,
                                     x, t, cfg: SimConfig, h: float = 1e-3,
                                     stream_tag: int = 0):
    """Estimate Gamma-tilde(P_t f)(x) = sum_g |grad_k(P_t f)(g x)|^2.

    Returns per-t dicts with the debiased estimate, its standard error, and
    the gradient vector at the identity element.  The debiasing subtracts the
    delta-method variance of each squared combination, so small true values do
    not acquire a positive noise-floor bias.
    """
    t_list = [float(t)] if np.isscalar(t) else [float(s) for s in t]
    dyn = ParticleDynamics(ctx, drift)
    fc = _as_callable(f, dyn.n)
    stencil = GradientStencil(ctx, np.asarray(x, dtype=float), h)
    W = stencil.combo_matrix()
    states, flags = simulate_coupled(dyn, stencil.points, t_list, cfg,
                                     stream_tag)
    results = []
    for tv, st in zip(t_list, states):
        vals = np.asarray(fc(st), dtype=float)
        est, cov, _ = _combo_stats(W, vals, flags)
        gamma = float(est @ est - np.trace(cov))
        q = 2.0 * est
        se = float(math.sqrt(max(q @ cov @ q, 0.0)))
        results.append({
            "t": tv, "estimate": gamma, "std_error": se,
            "gradient_identity": est[:dyn.n].copy(),
            "n_flagged": int(flags.sum()), "n_replicas": cfg.n_replicas,
        })
    return results[0] if np.isscalar(t) else results


@dataclass
class GradientBoundRow:
    system: str
    t: float
    x: tuple
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    eta: float
    margin: float
    combined_se: float
    passed: bool


def verify_gradient_bound(ctx: DunklContext, drift: DriftSpec, f, probes,
                          t_list, cfg: SimConfig, h: float = 1e-3,
                          grad_f: Callable | None = None,
                          stream_tag: int = 0) -> List[GradientBoundRow]:
    """Check Gamma-tilde(P_t f) <= e^{2 eta t} P_t(Gamma-tilde f) at each probe.

    One coupled run per probe carries every stencil point and every checkpoint;
    the right-hand side reuses the identity-point paths with the pointwise
    Gamma-tilde(f) observable.  Pass criterion: margin >= -3 combined SE.
    At t = 0 both sides evaluate pointwise and agree up to the O(h^2)
    finite-difference truncation.
    """
    from .calculus import eta_constant

    drift.validate(ctx, seed=cfg.seed)
    eta = float(eta_constant(drift, ctx))
    dyn = ParticleDynamics(ctx, drift)
    fc = _as_callable(f, dyn.n)
    t_arr = [float(t) for t in t_list]
    rows: List[GradientBoundRow] = []
    for probe in probes:
        probe = np.asarray(probe, dtype=float)
        stencil = GradientStencil(ctx, probe, h)
        W = stencil.combo_matrix()
        states, flags = simulate_coupled(dyn, stencil.points, t_arr, cfg,
                                         stream_tag)
        good = ~flags
        n_good = int(good.sum())
        for tv, st in zip(t_arr, states):
            vals = np.asarray(fc(st), dtype=float)
            est, cov, _ = _combo_stats(W, vals, flags)
            lhs = float(est @ est - np.trace(cov))
            q = 2.0 * est
            lhs_se = float(math.sqrt(max(q @ cov @ q, 0.0)))
            gamma_obs = ctx.symmetrised_gradient_at(fc, st[0][good], h=h,
                                                    grad=grad_f)
            rhs_mean = float(gamma_obs.mean())
            rhs_se_raw = float(gamma_obs.std(ddof=1) / math.sqrt(n_good))
            factor = math.exp(2 * eta * tv)
            rhs = factor * rhs_mean
            rhs_se = factor * rhs_se_raw
            combined = math.hypot(lhs_se, rhs_se)
            margin = rhs - lhs
            rows.append(GradientBoundRow(
                ctx.root.label, tv, tuple(probe), lhs, lhs_se, rhs, rhs_se,
                eta, margin, combined, margin >= -3.0 * combined))
    return rows


# -- Lyapunov machinery --------------------------------------------------------


def _psi(s):
    out = np.zeros_like(s, dtype=float)
    pos = s > 1e-2  # below this exp(-1/s) underflows anyway
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def chi(t):
    """Smooth cutoff: 0 on (-inf, 1], 1 on [2, inf)."""
    t = np.asarray(t, dtype=float)
    a = _psi(t - 1.0)
    b = _psi(2.0 - t)
    return a / (a + b + (a + b == 0.0))


def chi_derivatives(t):
    """(chi, chi', chi'') evaluated together; analytic on the transition band."""
    t = np.asarray(t, dtype=float)
    c = np.where(t >= 2.0, 1.0, 0.0)
    c1 = np.zeros_like(t)
    c2 = np.zeros_like(t)
    band = (t > 1.0) & (t < 2.0)
    if band.any():
        tb = t[band]
        s, w = tb - 1.0, 2.0 - tb
        a, b = np.exp(-1.0 / s), np.exp(-1.0 / w)
        ap = a / s ** 2
        bp = -b / w ** 2
        app = a * (1.0 / s ** 4 - 2.0 / s ** 3)
        bpp = b * (1.0 / w ** 4 - 2.0 / w ** 3)
        D = a + b
        Dp = ap + bp
        num = ap * b - a * bp
        c[band] = a / D
        c1[band] = num / D ** 2
        nump = app * b - a * bpp
        c2[band] = (nump * D - 2.0 * num * Dp) / D ** 3
    return c, c1, c2


@dataclass
class LyapunovSpec:
    """rho(x) = |x| chi(|x|) together with the closed-form action of the
    generator: for reflection-invariant radial rho,

      Delta_k rho = (n + 2 gamma - 1) chi/r + (n + 2 gamma + 1) chi' + r chi''
      b . grad_k rho = b . grad rho = (<b(x), x>/r) (chi + r chi')

    (difference quotients vanish because rho is G-invariant).
    """

    n: int
    gamma: float
    c2: float = 0.5

    def rho(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return r * chi(r)

    def rho_radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return r * chi(r)

    def dunkl_laplacian_radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        c, c1, c2 = chi_derivatives(r)
        safe = np.maximum(r, 1e-12)
        out = (self.n + 2 * self.gamma - 1.0) * c / safe \
            + (self.n + 2 * self.gamma + 1.0) * c1 + r * c2
        return np.where(r <= 1.0, 0.0, out)

    def generator_radial(self, r, c_drift: float) -> np.ndarray:
        """L rho on the radial grid for linear drift b = -c x."""
        r = np.asarray(r, dtype=float)
        c, c1, _ = chi_derivatives(r)
        return self.dunkl_laplacian_radial(r) - c_drift * r * (c + r * c1)

    def fit_c1(self, r_grid, c_drift: float) -> float:
        """Smallest C_1 with L rho <= C_1 - C_2 rho on the grid."""
        vals = self.generator_radial(r_grid, c_drift) \
            + self.c2 * self.rho_radial(r_grid)
        return float(np.max(vals))


@dataclass
class LyapunovReport:
    c1: float
    c2: float
    drift_coercive: bool
    pointwise_ok: bool
    rows: list = field(default_factory=list)   # (t, E[rho], se, bound, passed)
    n_flagged: int = 0

    @property
    def passed(self) -> bool:
        return self.drift_coercive and self.pointwise_ok and \
            all(r[-1] for r in self.rows)


def verify_lyapunov(ctx: DunklContext, drift: DriftSpec, x0, t_grid,
                    cfg: SimConfig, c2: float = 0.5,
                    r_max: float = 50.0) -> LyapunovReport:
    """Radial-grid audit of L rho <= C_1 - C_2 rho plus the semigroup bound
    E[rho(X_t)] <= rho(x0) + C_1/C_2 (checked at 3 standard errors)."""
    if drift.kind != "linear":
        raise ValueError("the Lyapunov verifier covers linear drifts")
    c = float(drift.c)
    spec = LyapunovSpec(ctx.n, float(ctx.root.gamma), c2)
    r_grid = np.linspace(0.0, r_max, 2001)
    c1 = spec.fit_c1(r_grid, c)
    lhs = spec.generator_radial(r_grid, c)
    pointwise_ok = bool(np.all(lhs <= c1 - c2 * spec.rho_radial(r_grid) + 1e-12))
    # admissibility: <x, b(x)>/|x|^2 = -c <= -C for some C > 0
    coercive = c > 0

    x0 = np.asarray(x0, dtype=float)
    bound_const = spec.rho(x0) + c1 / c2
    t_list = [float(t) for t in t_grid if t > 0]
    est = estimate_pt(ctx, drift, lambda s: spec.rho(s), x0, t_list, cfg,
                      quantity="E[rho(X_t)]")
    rows = []
    for e in est:
        ok = e.mean <= bound_const + 3.0 * e.std_error
        rows.append((e.t, e.mean, e.std_error, bound_const, ok))
    return LyapunovReport(c1, c2, coercive, pointwise_ok, rows,
                          est[0].n_flagged if est else 0)


# -- invariant measure ---------------------------------------------------------


@dataclass
class InvariantMeasureRow:
    f_name: str
    route: str
    value: float
    reference: float
    tolerance: float
    passed: bool


def verify_invariant_measure(ctx: DunklContext, drift: DriftSpec,
                             f_polys: Sequence[MultiPoly], cfg: SimConfig,
                             t_long: float = 8.0, burn_in: float = 3.0,
                             sample_every: float = 0.05,
                             quad_tol: float = 1e-6) -> List[InvariantMeasureRow]:
    """Three routes against the candidate invariant measure
    d nu = exp(-c |x|^2 / 2) w_k dx for linear drift:

    1. quadrature (n <= 2): |integral of L f d nu| <= quad_tol * scale;
    2. ensemble moments at t_long match nu-moments within 3 SE;
    3. per-replica time averages over [burn_in, t_long] match within 3 SE.

    For n > 2 the quadrature route is skipped and routes 2/3 are compared
    against each other.
    """
    from .calculus import integrate_gaussian_weighted

    if drift.kind != "linear":
        raise ValueError("the invariant-measure verifier covers linear drifts")
    c = float(drift.c)
    n = ctx.n
    rows: List[InvariantMeasureRow] = []

    have_quad = n <= 2
    z = None
    if have_quad:
        z = integrate_gaussian_weighted(ctx.root, lambda p: 1.0, c)

    f_vec = [_as_callable(f, n) for f in f_polys]
    nu_moments = []
    for f, ff in zip(f_polys, f_vec):
        name = f.to_string()
        if have_quad:
            lf = _as_callable(ctx.apply_generator(f, drift), n)
            resid = integrate_gaussian_weighted(
                ctx.root, lambda p: float(lf(np.atleast_1d(p))), c) / z
            mom = integrate_gaussian_weighted(
                ctx.root, lambda p: float(ff(np.atleast_1d(p))), c) / z
            scale = 1.0 + abs(mom)
            rows.append(InvariantMeasureRow(
                name, "quadrature |int L f dnu|", abs(resid), 0.0,
                quad_tol * scale, abs(resid) <= quad_tol * scale))
            nu_moments.append(mom)
        else:
            nu_moments.append(None)

    # one trajectory bundle serves both Monte Carlo routes
    t_grid = [round(burn_in + i * sample_every, 10)
              for i in range(int(round((t_long - burn_in) / sample_every)) + 1)]
    dyn = ParticleDynamics(ctx, drift)
    x0 = np.full(n, 1.0 / math.sqrt(n)) + 0.1 * np.arange(n)
    dyn.check_initial(x0.reshape(1, -1), cfg.eps_hyp)
    states, flags = simulate_coupled(dyn, x0.reshape(1, -1), t_grid, cfg)
    good = ~flags
    n_good = int(good.sum())
    for f, ff, mom in zip(f_polys, f_vec, nu_moments):
        name = f.to_string()
        vals = np.stack([np.asarray(ff(st[0][good]), dtype=float)
                         for st in states])   # (n_checkpoints, n_good)
        final = vals[-1]
        final_mean = float(final.mean())
        final_se = float(final.std(ddof=1) / math.sqrt(n_good))
        ta = vals.mean(axis=0)                # per-replica time averages
        ta_mean = float(ta.mean())
        ta_se = float(ta.std(ddof=1) / math.sqrt(n_good))
        if mom is not None:
            rows.append(InvariantMeasureRow(
                name, "ensemble moment at t_long", final_mean, mom,
                3.0 * final_se, abs(final_mean - mom) <= 3.0 * final_se))
            rows.append(InvariantMeasureRow(
                name, "time average vs nu", ta_mean, mom,
                3.0 * ta_se, abs(ta_mean - mom) <= 3.0 * ta_se))
        else:
            tol = 3.0 * math.hypot(final_se, ta_se)
            rows.append(InvariantMeasureRow(
                name, "time average vs ensemble", ta_mean, final_mean,
                tol, abs(ta_mean - final_mean) <= tol))
    return rows
