"""Coupled Dunkl diffusions on a lattice window.

The infinite system attaches one reflection-symmetric particle to every site
of Z^d (site state in R^N) and couples neighbouring sites through a bounded
drift perturbation.  Everything here runs on a finite window: the truncated
generator keeps the full single-site dynamics at every window site but adds
the interaction only inside the truncation box.  Sites outside the window are
frozen, which is exact for cylinder observables, because a site the box
interaction never reads evolves independently of everything the observable
depends on.

One window step of length cfg.dt:

  1. snapshot the window and freeze each interacting site's neighbour factor
     (the invariant mean of v(|omega_j|^2) over sites within range);
  2. every site advances independently with the single-particle stepper under
     drift -c omega_l + eps_l u(omega_l) * frozen factor; adaptive substeps,
     thinning and the exact wall channel all come from the single-particle
     engine;
  3. per-site flag vectors are merged order-independently.

Per-site randomness is a Philox stream keyed by (seed, packed site
coordinate), so a decoupled window (eps0 = 0) reproduces independent
single-site runs bit for bit, and common-random-number comparisons across
stencils, truncation boxes and initial conditions stay paired site by site.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable, List, Sequence

import numpy as np

from .calculus import DriftSpec, DunklContext
from .root_system import build_standard
from .semigroup import (
    WALL_CHANNEL_BIT,
    EnsembleEstimate,
    GradientStencil,
    LyapunovSpec,
    ParticleDynamics,
    SimConfig,
    _advance_block,
    _combo_stats,
    _steps_for_grid,
    chi_derivatives,
    encode_site,
    stream_for,
    thread_map,
)

# stream tag for generated probe configurations; disjoint from site tags
PROBE_TAG = 1 << 61


def _l1(site) -> int:
    return int(sum(abs(int(c)) for c in site))


def site_distance(a, b) -> int:
    return int(sum(abs(int(x) - int(y)) for x, y in zip(a, b)))


def distance_to_set(site, sites) -> int:
    return min(site_distance(site, s) for s in sites)


def _count_at_distance(d: int, m: int) -> int:
    """Number of lattice points of Z^d at l1 distance exactly m."""
    if m == 0:
        return 1
    return sum((1 << i) * comb(d, i) * comb(m - 1, i - 1)
               for i in range(1, min(d, m) + 1))


@lru_cache(maxsize=32)
def _profile_sum(d: int, exponent: float, m_max: int = 100_000) -> float:
    """Sum of (1 + |l|_1)^{-exponent} over all of Z^d.

    Direct summation over shells plus an integral tail estimate; infinite
    when the exponent does not beat the shell growth m^{d-1}.
    """
    if exponent <= d:
        return math.inf
    m = np.arange(1, m_max + 1, dtype=float)
    counts = np.array([_count_at_distance(d, i) for i in range(1, m_max + 1)],
                      dtype=float)
    total = 1.0 + float(np.sum(counts * (1.0 + m) ** (-exponent)))
    # counts grow like 2^d m^(d-1)/(d-1)!; bound the dropped shells
    tail = (2.0 ** d / math.factorial(d - 1)) \
        * m_max ** (d - exponent) / (exponent - d)
    return total + tail


def _default_u(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / (1.0 + np.sum(x * x, axis=-1, keepdims=True))


def _default_v(s: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.asarray(s, dtype=float))


@dataclass
class InteractionSpec:
    """Site coupling e^(l)(omega) = eps_l * u(omega_l) * mean_nb v(|omega_j|^2).

    u is G-equivariant and bounded, v is a bounded function of the invariant
    |omega_j|^2, so equivariance and locality hold by construction.  The
    amplitude profile is eps_l = eps0 (1+|l|_1)^{-(d+delta)} ("summable") or
    the constant eps0 ("uniform", outside the summability hypothesis).  The
    *_sup fields declare the sup-norm bounds the propagation constants use;
    the defaults are the analytic values for the default family:

      sup|u| = 1/2,  sup|du_m/dx_i| = 1,  sup|(u - u o sigma)/<alpha,.>| =
      sqrt2, sup|v| = 1, sup|2r v'(r^2)| = 9/(8 sqrt3).
    """

    d: int
    eps0: float
    decay: str = "summable"
    delta: float = 1.0
    u: Callable = None
    v: Callable = None
    u_sup: float = 0.5
    du_sup: float = 1.0
    au_sup: float = math.sqrt(2.0)
    v_sup: float = 1.0
    dv_chain_sup: float = 9.0 / (8.0 * math.sqrt(3.0))
    ratio_unit: float | None = None
    label: str = "default"

    def __post_init__(self):
        if self.eps0 < 0:
            raise ValueError("interaction amplitude eps0 must be >= 0")
        if self.decay not in ("summable", "uniform"):
            raise ValueError("decay must be 'summable' or 'uniform'")
        if self.decay == "summable" and self.delta <= 0:
            raise ValueError("summable profile needs delta > 0")
        if self.u is None:
            self.u = _default_u
        if self.v is None:
            self.v = _default_v
        if self.ratio_unit is None:
            # <alpha, u(x)>/<alpha, x> = 1/(1+|x|^2) <= 1 for the default u,
            # so the per-unit-amplitude rate ratio is bounded by v_sup; any
            # custom u must declare its own bound
            self.ratio_unit = self.v_sup

    def eps_at(self, site) -> float:
        if self.eps0 == 0.0:
            return 0.0
        if self.decay == "uniform":
            return self.eps0
        return self.eps0 * (1.0 + _l1(site)) ** (-(self.d + self.delta))

    def zeta(self) -> float:
        """sum_l ||e^(l)||_inf; finite only for the summable profile."""
        if self.eps0 == 0.0:
            return 0.0
        if self.decay == "uniform":
            return math.inf
        return self.eps0 * self.u_sup * self.v_sup \
            * _profile_sum(self.d, self.d + self.delta)


class LatticeSpec:
    """Model plus truncation geometry.

    Window sites are the l1 ball of window_radius, ordered lexicographically;
    the truncation box is the l1 ball of box_radius.  The window must contain
    every site the box interaction reads (box_radius + range_R - 1), so that
    freezing the exterior is exact.
    """

    def __init__(self, ctx: DunklContext, d: int, range_R: int,
                 site_drift: DriftSpec, interaction: InteractionSpec,
                 box_radius: int, window_radius: int | None = None):
        if range_R < 1:
            raise ValueError("interaction range must be a positive integer")
        if box_radius < 0:
            raise ValueError("box radius must be >= 0")
        if interaction.d != d:
            raise ValueError("interaction profile dimension mismatch")
        if interaction.eps0 > 0 and site_drift.kind != "linear":
            raise ValueError("coupled windows need the linear site drift")
        if interaction.eps0 > 0 and \
                interaction.eps0 * interaction.ratio_unit > float(site_drift.c):
            raise ValueError(
                "eps0 * ratio_unit exceeds c: jump rates can turn negative")
        self.ctx = ctx
        self.N = ctx.n
        self.d = int(d)
        self.range_R = int(range_R)
        self.site_drift = site_drift
        self.interaction = interaction
        self.box_radius = int(box_radius)
        min_window = box_radius + range_R - 1
        self.window_radius = int(window_radius) if window_radius is not None \
            else min_window
        if self.window_radius < min_window:
            raise ValueError(
                f"window radius {self.window_radius} cannot hold the enlarged "
                f"box; need >= {min_window}")

        self.window_sites: List[tuple] = sites_in_ball(self.d, self.window_radius)
        self.site_index = {s: i for i, s in enumerate(self.window_sites)}
        self.n_window = len(self.window_sites)
        self.box_sites = [s for s in self.window_sites
                          if _l1(s) <= self.box_radius]
        self.neighbor_offsets = [
            o for o in itertools.product(range(-range_R + 1, range_R),
                                         repeat=self.d)
            if 0 < _l1(o) < range_R]
        self.n_neighbors = len(self.neighbor_offsets)

        root_f = ctx.root if ctx.root.scalar_mode == "float" \
            else ctx.root.to_float()
        self.roots_np = root_f.pos_roots_np
        self.group_np = root_f.group_np
        self.gamma = float(root_f.gamma)

    def with_box(self, box_radius: int,
                 window_radius: int | None = None) -> "LatticeSpec":
        return LatticeSpec(self.ctx, self.d, self.range_R, self.site_drift,
                           self.interaction, box_radius, window_radius)

    def site_tag(self, site) -> int:
        return encode_site(site)

    def neighbor_indices(self, site) -> List[int]:
        out = []
        for o in self.neighbor_offsets:
            j = tuple(int(a) + int(b) for a, b in zip(site, o))
            out.append(self.site_index[j])
        return out

    def box_tables(self):
        """(window indices, eps vector, neighbor index matrix) of box sites."""
        idx = np.array([self.site_index[s] for s in self.box_sites], dtype=int)
        eps = np.array([self.interaction.eps_at(s) for s in self.box_sites])
        nb = np.array([self.neighbor_indices(s) for s in self.box_sites],
                      dtype=int)
        return idx, eps, nb

    def __repr__(self):
        return (f"LatticeSpec(d={self.d}, N={self.N}, "
                f"{self.ctx.root.label}, R={self.range_R}, "
                f"box={self.box_radius}, window={self.window_radius}, "
                f"eps0={self.interaction.eps0})")


def sites_in_ball(d: int, radius: int) -> List[tuple]:
    sites = [s for s in itertools.product(range(-radius, radius + 1), repeat=d)
             if _l1(s) <= radius]
    sites.sort()
    return sites


def build_default_model(d: int = 1, N: int = 1, family: str = "A",
                        rank: int = 1, k=0.25, c: float = 1.0,
                        eps0: float = 0.1, decay: str = "summable",
                        delta: float = 1.0, range_R: int = 2,
                        box_radius: int = 6,
                        window_radius: int | None = None,
                        allow_uniform: bool = False) -> LatticeSpec:
    """Concrete lattice model: linear site drift -c omega_l and the bounded
    equivariant coupling eps_l * u(omega_l) * mean v(|omega_j|^2) with
    u(x) = x/(1+|x|^2), v(s) = 1/(1+s).

    eps0 <= c guarantees nonnegative jump rates sitewise, because
    |<alpha, e^(l)>| = eps_l * V * |<alpha, omega_l>| / (1+|omega_l|^2)
    with V in (0, 1], so the perturbation-to-coordinate ratio never
    exceeds eps_l.  The uniform profile violates the summability the
    truncation limit needs and must be requested explicitly.
    """
    if c <= 0:
        raise ValueError("site drift needs c > 0")
    if eps0 > c:
        raise ValueError(
            f"eps0 = {eps0} > c = {c} can produce negative jump rates")
    if decay == "uniform" and not allow_uniform:
        raise ValueError("uniform amplitude profile is outside the summable "
                         "hypothesis; pass allow_uniform=True to force it")
    root = build_standard(family, rank, k, scalar_mode="float")
    if root.n != N:
        raise ValueError(
            f"{root.label} lives in R^{root.n}, but N = {N} was requested")
    ctx = DunklContext(root)
    inter = InteractionSpec(d=d, eps0=eps0, decay=decay, delta=delta)
    return LatticeSpec(ctx, d, range_R, DriftSpec.linear(c), inter,
                       box_radius, window_radius)


def interaction_at(spec: LatticeSpec, omega: np.ndarray, site) -> np.ndarray:
    """Unfrozen e^(site) of window configurations (..., n_window, N)."""
    omega = np.asarray(omega, dtype=float)
    site = tuple(site)
    eps = spec.interaction.eps_at(site) if _l1(site) <= spec.box_radius else 0.0
    if eps == 0.0:
        return np.zeros(omega.shape[:-2] + (spec.N,))
    nb = spec.neighbor_indices(site)
    sq = np.sum(omega[..., nb, :] ** 2, axis=-1)
    v_mean = np.mean(spec.interaction.v(sq), axis=-1)
    own = omega[..., spec.site_index[site], :]
    return eps * spec.interaction.u(own) * v_mean[..., None]


# -- window simulation ---------------------------------------------------------


def _site_dynamics(spec: LatticeSpec, P: int, R: int):
    """Per-site dynamics; interacting sites get a perturbed drift reading a
    per-(window, replica) coefficient buffer refreshed every global step."""
    base = ParticleDynamics(spec.ctx, spec.site_drift)
    dyns, coef_slots = [], {}
    for li, site in enumerate(spec.window_sites):
        eps = spec.interaction.eps_at(site) \
            if _l1(site) <= spec.box_radius else 0.0
        if eps > 0.0:
            coef = np.zeros((P, R))
            u = spec.interaction.u
            e_fn = (lambda x, _c=coef, _u=u: _c[..., None] * _u(x))
            drift = DriftSpec.perturbed_linear(
                spec.site_drift.c, e_fn,
                ratio_bound=min(eps * spec.interaction.ratio_unit,
                                float(spec.site_drift.c)),
                name=f"site{site}")
            dyns.append(ParticleDynamics(spec.ctx, drift))
            coef_slots[li] = coef
        else:
            dyns.append(base)
    return dyns, coef_slots


def simulate_window(spec: LatticeSpec, windows: np.ndarray,
                    t_grid: Sequence[float], cfg: SimConfig,
                    f_sites: Sequence = ()):
    """Advance coupled window configurations to each checkpoint.

    windows: (n_window, N) or (P, n_window, N); coupled configurations share
    noise and substep schedules sitewise.  Returns (states, flags) with one
    (P, n_replicas, n_window, N) array per checkpoint and the merged replica
    flag vector.
    """
    windows = np.asarray(windows, dtype=float)
    if windows.ndim == 2:
        windows = windows[None]
    P, n_w, N = windows.shape
    if n_w != spec.n_window or N != spec.N:
        raise ValueError(f"windows must be (P, {spec.n_window}, {spec.N})")
    for s in f_sites:
        s = tuple(s)
        if _l1(s) > spec.box_radius:
            raise ValueError(f"observable site {s} lies outside the box "
                             f"(radius {spec.box_radius})")
    ap = np.einsum("pwn,an->pwa", windows, spec.roots_np)
    if ap.size and float(np.min(np.abs(ap))) < cfg.eps_hyp:
        p, w, _ = np.unravel_index(int(np.argmin(np.abs(ap))), ap.shape)
        raise ValueError(
            f"initial state at site {spec.window_sites[w]} lies within "
            f"{cfg.eps_hyp} of a reflecting hyperplane")

    R = cfg.n_replicas
    dyns, coef_slots = _site_dynamics(spec, P, R)
    gens = [stream_for(cfg.seed, spec.site_tag(s)) for s in spec.window_sites]
    wall_gens = [stream_for(cfg.seed, spec.site_tag(s) | WALL_CHANNEL_BIT)
                 for s in spec.window_sites]
    box_idx, eps_vec, nb_mat = spec.box_tables()
    v = spec.interaction.v

    x = np.repeat(windows[:, None, :, :], R, axis=1)   # (P, R, n_w, N)
    flags = np.zeros(R, dtype=bool)
    out = []
    for n_steps in _steps_for_grid(t_grid, cfg.dt):
        for _ in range(n_steps):
            if coef_slots:
                sq = np.einsum("prwn,prwn->prw", x, x)
                vmean = v(sq)[:, :, nb_mat].mean(axis=-1)  # (P, R, n_box)
                for bi, li in enumerate(box_idx):
                    if li in coef_slots:
                        coef_slots[li][...] = eps_vec[bi] * vmean[:, :, bi]
            snapshot_flags = flags

            def _step(li, _flags=snapshot_flags):
                fl = _flags.copy()
                xi = np.ascontiguousarray(x[:, :, li, :])
                _advance_block(xi, fl, cfg.dt, cfg, gens[li], dyns[li],
                               wall_gens[li])
                x[:, :, li, :] = xi
                return fl

            parts = thread_map(_step, list(range(n_w)))
            merged = snapshot_flags
            for fl in parts:
                merged = merged | fl
            flags = merged
        out.append(x.copy())
    return out, flags


# -- cylinder observables ------------------------------------------------------


@dataclass(frozen=True)
class CylinderFunction:
    """Observable reading finitely many sites; fn maps (..., m, N) -> (...)
    where m = len(sites).  grad, if given, returns the (..., m, N) array of
    partial derivatives (used for sharp sup-norm envelopes)."""

    sites: tuple
    fn: Callable
    label: str = "f"
    grad: Callable | None = None

    def values(self, states: np.ndarray, spec: LatticeSpec) -> np.ndarray:
        idx = [spec.site_index[tuple(s)] for s in self.sites]
        return np.asarray(self.fn(states[..., idx, :]), dtype=float)


def coordinate_observable(site=(0,), component: int = 0) -> CylinderFunction:
    site = tuple(site)

    def fn(sub):
        return sub[..., 0, component]

    def grad(sub):
        g = np.zeros_like(sub)
        g[..., 0, component] = 1.0
        return g

    return CylinderFunction((site,), fn, f"omega_{site}[{component}]", grad)


def tanh_observable(site=(0,), component: int = 0) -> CylinderFunction:
    site = tuple(site)

    def fn(sub):
        return np.tanh(sub[..., 0, component])

    def grad(sub):
        g = np.zeros_like(sub)
        g[..., 0, component] = 1.0 / np.cosh(sub[..., 0, component]) ** 2
        return g

    return CylinderFunction((site,), fn, f"tanh(omega_{site}[{component}])",
                            grad)


def estimate_window_pt(spec: LatticeSpec, f: CylinderFunction, omega0,
                       t, cfg: SimConfig):
    """P_t^Lambda f at one window configuration (EnsembleEstimate per t)."""
    scalar = np.isscalar(t)
    t_list = [float(t)] if scalar else [float(s) for s in t]
    states, flags = simulate_window(spec, omega0, t_list, cfg,
                                    f_sites=f.sites)
    good = ~flags
    n_good = int(good.sum())
    if n_good == 0:
        raise ArithmeticError("all replicas flagged; no estimate available")
    omega0 = np.asarray(omega0, dtype=float)
    x0 = tuple(np.round(omega0[[spec.site_index[tuple(s)]
                                for s in f.sites]].ravel(), 12))
    out = []
    for tv, st in zip(t_list, states):
        vals = f.values(st, spec)[0, good]
        se = float(vals.std(ddof=1) / math.sqrt(n_good)) if n_good > 1 else 0.0
        out.append(EnsembleEstimate(float(vals.mean()), se, cfg.n_replicas,
                                    int(flags.sum()), tv, x0,
                                    f"P_t^L {f.label}"))
    return out[0] if scalar else out


def default_probe_windows(spec: LatticeSpec, n_probes: int, seed: int,
                          spread: float = 2.0,
                          margin: float = 0.05) -> np.ndarray:
    """Deterministic probe configurations, nudged off every reflecting
    hyperplane (resample any site vector within `margin` of a wall)."""
    gen = stream_for(seed, PROBE_TAG)
    w = gen.uniform(-spread, spread, size=(n_probes, spec.n_window, spec.N))
    for _ in range(200):
        ap = np.einsum("pwn,an->pwa", w, spec.roots_np)
        bad = (np.abs(ap) < margin).any(axis=-1)
        if not bad.any():
            return w
        w[bad] = gen.uniform(-spread, spread, size=(int(bad.sum()), spec.N))
    raise RuntimeError("could not clear the wall margin while sampling probes")


def fill_window(spec: LatticeSpec, fill: float = 0.2,
                overrides: dict | None = None) -> np.ndarray:
    """Constant window configuration with optional per-site replacements."""
    w = np.full((spec.n_window, spec.N), float(fill))
    for site, vec in (overrides or {}).items():
        w[spec.site_index[tuple(site)]] = np.asarray(vec, dtype=float)
    return w


# -- propagation constants -----------------------------------------------------


@dataclass
class PropagationConstants:
    """Constants controlling information propagation and coalescence.

    eta is the per-site drift contraction constant (sitewise constant for the
    linear drift), s_sup the sup over l of the row sums sum_j E_{l,j} of the
    interaction sensitivity table, eps_split the free parameter splitting the
    mixed products, and

        eta_tilde = eta + eps_split (N/2)(1 + sqrt2 gamma) s_sup
        c_tilde   = |G| (1/eps_split) N (1 + sqrt2 gamma) s_sup.

    (sigma, tau) certify the decay envelope: log(c_tilde/tau) + c_tilde/tau
    + 1 <= -4 sigma with tau >= 1, applicable to sites with N_l >= tau * s.
    """

    eta: float
    s_sup: float
    eps_split: float
    eta_tilde: float
    c_tilde: float
    sigma: float
    tau: float
    zeta: float
    gamma: float
    group_order: int
    site_dim: int
    ergodic_ok: bool
    exploratory: bool

    def sigma_for_tau(self, tau: float) -> float:
        if tau < 1.0:
            raise ValueError("tau must be >= 1")
        if self.c_tilde <= 0.0:
            return math.inf
        return -(math.log(self.c_tilde / tau) + self.c_tilde / tau + 1.0) / 4.0

    def largest_sigma(self, tau_cap: float) -> float:
        """Largest decay exponent certified by some tau in [1, tau_cap],
        located by bisection on the envelope condition."""
        if tau_cap < 1.0:
            raise ValueError("tau_cap must be >= 1")
        if self.c_tilde <= 0.0:
            return math.inf

        def admissible(sig: float) -> bool:
            # condition is monotone in tau, so checking the cap suffices
            return (math.log(self.c_tilde / tau_cap)
                    + self.c_tilde / tau_cap + 1.0) <= -4.0 * sig

        lo, hi = 0.0, 1.0
        if not admissible(lo):
            return self.sigma_for_tau(tau_cap)  # negative: no certificate
        while admissible(hi):
            hi *= 2.0
            if hi > 1e6:
                break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        return lo


def e_sensitivity_bound(spec: LatticeSpec, l, j) -> float:
    """Analytic bound on the sensitivity of e^(j) to the site-l coordinates:
    max over components of sup|d/dx_i^(l) e^(j)_m| and of the difference
    quotients sup|(e^(j)_m - e^(j)_m o sigma^(l))/<alpha, omega_l>|."""
    inter = spec.interaction
    if _l1(j) > spec.box_radius:
        return 0.0
    dist = site_distance(l, j)
    if dist == 0:
        # own-site factor: derivative and difference quotient of u
        return inter.eps_at(j) * inter.v_sup * max(inter.du_sup, inter.au_sup)
    if dist < spec.range_R:
        # neighbour factor: chain rule through v(|omega_l|^2); the
        # difference-quotient part vanishes because |.|^2 is G-invariant
        return inter.eps_at(j) * inter.u_sup * inter.dv_chain_sup \
            / spec.n_neighbors
    return 0.0


def compute_constants(spec: LatticeSpec, eps: float | None = None,
                      tau: float | None = None) -> PropagationConstants:
    """Evaluate the propagation/coalescence constants for the model.

    eps is the product-splitting parameter; the default sqrt(|G|) minimizes
    c_tilde + 2 eta_tilde, giving the coalescence condition its widest
    margin.  tau caps the envelope certificate search (default 1)."""
    drift = spec.site_drift
    if drift.kind != "linear":
        raise ValueError("propagation constants cover the linear site drift")
    c = float(drift.c)
    gamma = spec.gamma
    group_order = len(spec.group_np)
    N = spec.N
    eta = -c + 2.0 * c * gamma

    # sup over l of sum_j E_{l,j}: both the own-site amplitude and the
    # neighbour amplitudes decay in |l|_1, so scanning the enlarged box
    # (which contains the origin) finds the sup
    scan = sites_in_ball(spec.d, spec.box_radius + spec.range_R - 1)
    s_sup = 0.0
    for l in scan:
        row = e_sensitivity_bound(spec, l, l)
        for o in spec.neighbor_offsets:
            j = tuple(int(a) + int(b) for a, b in zip(l, o))
            row += e_sensitivity_bound(spec, l, j)
        s_sup = max(s_sup, row)

    eps_split = float(eps) if eps is not None else math.sqrt(group_order)
    if eps_split <= 0:
        raise ValueError("splitting parameter must be positive")
    a_coef = 0.5 * N * (1.0 + math.sqrt(2.0) * gamma) * s_sup
    eta_tilde = eta + eps_split * a_coef
    c_tilde = group_order * (2.0 * a_coef) / eps_split
    zeta = spec.interaction.zeta()
    ergodic_ok = eta_tilde < 0.0 and c_tilde <= -2.0 * eta_tilde

    consts = PropagationConstants(
        eta=eta, s_sup=s_sup, eps_split=eps_split, eta_tilde=eta_tilde,
        c_tilde=c_tilde, sigma=0.0, tau=1.0, zeta=zeta, gamma=gamma,
        group_order=group_order, site_dim=N, ergodic_ok=ergodic_ok,
        exploratory=gamma >= 0.5)
    consts.tau = float(tau) if tau is not None else 1.0
    consts.sigma = consts.largest_sigma(consts.tau)
    return consts


def n_l_of(spec: LatticeSpec, site, f_sites) -> int:
    """Propagation step count floor(d(l, Lambda(f))/R) + 1."""
    return distance_to_set(tuple(site), [tuple(s) for s in f_sites]) \
        // spec.range_R + 1


# -- finite speed of propagation -----------------------------------------------


def cylinder_gamma_sup(spec: LatticeSpec, f: CylinderFunction,
                       radius: float = 6.0, n_grid: int = 2001,
                       n_probes: int = 256, seed: int = 0) -> float:
    """Probe-sup of sum_j ||Gamma-tilde^(j) f||_inf over configurations.

    For each cylinder site the symmetrised gradient of f in that site's
    coordinates is maximized over a sweep (a dense 1-d grid when the cylinder
    is a single scalar site, seeded probe configurations otherwise), plus the
    wall-limit value at the origin where the difference quotients become
    derivatives.
    """
    ctx = spec.ctx
    m = len(f.sites)
    gen = stream_for(seed, PROBE_TAG + 1)
    if m == 1 and spec.N == 1:
        g = np.linspace(1e-3, radius, n_grid)
        probes = np.concatenate([-g[::-1], g])[:, None, None]  # (P, 1, 1)
    else:
        probes = gen.uniform(-radius, radius, size=(n_probes, m, spec.N))
        ap = np.einsum("pmn,an->pma", probes, spec.roots_np)
        bad = (np.abs(ap) < 1e-3).any(axis=-1)
        probes[bad] += 0.1

    total = 0.0
    for slot in range(m):
        def fc(x, _s=slot):
            sub = probes.copy()
            sub[..., _s, :] = x
            return f.fn(sub)

        def gc(x, _s=slot):
            if f.grad is None:
                return None
            sub = probes.copy()
            sub[..., _s, :] = x
            return f.grad(sub)[..., _s, :]

        grad_arg = gc if f.grad is not None else None
        vals = ctx.symmetrised_gradient_at(fc, probes[:, slot, :], h=1e-5,
                                           grad=grad_arg)
        best = float(np.max(vals))
        # wall limit: difference quotients converge to <alpha, grad f>
        zero = np.zeros((1, m, spec.N))
        if f.grad is not None:
            g0 = f.grad(zero)[0, slot]
        else:
            h = 1e-6
            g0 = np.zeros(spec.N)
            for i in range(spec.N):
                zp, zm = zero.copy(), zero.copy()
                zp[0, slot, i] += h
                zm[0, slot, i] -= h
                g0[i] = (float(f.fn(zp)[0]) - float(f.fn(zm)[0])) / (2 * h)
        root_f = ctx.root if ctx.root.scalar_mode == "float" \
            else ctx.root.to_float()
        t0 = g0 + (root_f.k_np * (spec.roots_np @ g0)) @ spec.roots_np
        best = max(best, len(spec.group_np) * float(t0 @ t0))
        total += best
    return total


def site_gamma_estimates(spec: LatticeSpec, f: CylinderFunction,
                         omega0: np.ndarray, sites: Sequence, s: float,
                         cfg: SimConfig, h: float = 1e-3):
    """Gamma-tilde^(l)(P_s^Lambda f) at one window configuration.

    All requested sites' finite-difference/reflection stencils run as one
    coupled bundle sharing every stream, so the per-replica combinations stay
    paired.  Each row reports the plug-in value |g_hat|^2 (almost surely
    positive, upward-biased by the stencil noise floor, so always a valid
    upper-bound reading), the debiased value |g_hat|^2 - tr(cov), the
    standard error of the plug-in value and the floor tr(cov) itself.
    Returns ([(plug, debiased, se, floor)] aligned with sites, n_flagged).
    """
    omega0 = np.asarray(omega0, dtype=float)
    windows = [omega0]
    stencils, w_idx = [], []
    for site in sites:
        li = spec.site_index[tuple(site)]
        st = GradientStencil(spec.ctx, omega0[li], h)
        idxs = []
        for p in st.points:
            if np.max(np.abs(p - omega0[li])) < 1e-12:
                idxs.append(0)
            else:
                w = omega0.copy()
                w[li] = p
                windows.append(w)
                idxs.append(len(windows) - 1)
        stencils.append(st)
        w_idx.append(np.array(idxs, dtype=int))

    states, flags = simulate_window(spec, np.array(windows), [float(s)], cfg,
                                    f_sites=f.sites)
    vals = f.values(states[0], spec)         # (P, R)
    rows = []
    for st, idxs in zip(stencils, w_idx):
        W = st.combo_matrix()
        est, cov, _ = _combo_stats(W, vals[idxs], flags)
        floor = float(np.trace(cov))
        plug = float(est @ est)
        q = 2.0 * est
        # var(|g|^2) = q'cov q + 2 tr(cov^2) for a Gaussian gradient estimate
        se = float(math.sqrt(max(q @ cov @ q, 0.0)
                             + 2.0 * float(np.sum(cov * cov))))
        rows.append((plug, plug - floor, se, floor))
    return rows, int(flags.sum())


def _wls_line(x: np.ndarray, y: np.ndarray, se_y: np.ndarray):
    """Weighted least squares line fit; returns (slope, slope_se)."""
    w = 1.0 / np.maximum(se_y, 1e-300) ** 2
    xm = float(np.sum(w * x) / np.sum(w))
    sxx = float(np.sum(w * (x - xm) ** 2))
    if sxx <= 0.0:
        return math.nan, math.inf
    slope = float(np.sum(w * (x - xm) * y) / sxx)
    return slope, math.sqrt(1.0 / sxx)


@dataclass
class FiniteSpeedRow:
    site: tuple
    distance: int
    n_l: int
    gamma_est: float      # plug-in |g_hat|^2; valid as an upper-bound reading
    gamma_debiased: float
    std_error: float
    floor: float          # tr(cov), the stencil noise level at this site
    envelope: float
    noise_floor: bool     # debiased value below 3 SE: upper bound only


@dataclass
class FiniteSpeedReport:
    rows: List[FiniteSpeedRow]
    sigma: float
    tau: float
    gamma_f_sup: float
    fitted_ratio: float
    ratio_se: float
    strictly_decreasing: bool
    ratio_ok: bool
    below_envelope: bool
    passed: bool
    constants: PropagationConstants
    n_flagged: int
    s: float


def finite_speed_test(spec: LatticeSpec, f: CylinderFunction,
                      sites: Sequence, s: float, cfg: SimConfig,
                      h: float = 1e-3, probes: np.ndarray | None = None,
                      n_probes: int = 2,
                      eps_split: float | None = None) -> FiniteSpeedReport:
    """Estimate the information front: Gamma-tilde^(l)(P_s^Lambda f) along
    sites of increasing distance, against the certified decay envelope
    e^{-2 N_l sigma} * sum_j ||Gamma-tilde^(j) f||_probe-sup.

    Each profile row takes the probe-sup of the plug-in estimate; beyond the
    front the plug-in value is the CRN decoupling scale of the stencil paths,
    an upper bound that itself collapses with the front, while the debiased
    value (also reported) is sign-indefinite there and only its magnitude
    carries information.
    """
    f_sites = [tuple(q) for q in f.sites]
    sites = [tuple(q) for q in sites]
    for l in sites:
        if l in f_sites:
            raise ValueError(f"probed site {l} lies in the observable support")
    n_ls = [n_l_of(spec, l, f_sites) for l in sites]
    tau_cap = max(1.0, min(n_ls) / s) if s > 0 else 1.0
    consts = compute_constants(spec, eps=eps_split, tau=tau_cap)
    sigma = consts.sigma
    gamma_f = cylinder_gamma_sup(spec, f, seed=cfg.seed)

    if probes is None:
        probes = default_probe_windows(spec, n_probes, cfg.seed)
    best = [(-math.inf, 0.0, 0.0, 0.0)] * len(sites)
    flagged = 0
    for pw in probes:
        rows, n_fl = site_gamma_estimates(spec, f, pw, sites, s, cfg, h)
        flagged = max(flagged, n_fl)
        for i, row in enumerate(rows):
            if row[0] > best[i][0]:
                best[i] = row

    out_rows = []
    for (l, n_l, (plug, deb, se, floor)) in zip(sites, n_ls, best):
        env = math.exp(-2.0 * n_l * sigma) * gamma_f if sigma != math.inf \
            else 0.0
        out_rows.append(FiniteSpeedRow(l, distance_to_set(l, f_sites), n_l,
                                       plug, deb, se, floor, env,
                                       deb <= 3.0 * se))

    ests = np.array([r.gamma_est for r in out_rows])
    ses = np.array([r.std_error for r in out_rows])
    n_arr = np.array(n_ls, dtype=float)
    decreasing = bool(np.all(np.diff(ests) < 0.0))
    pos = ests > 0.0
    if pos.sum() >= 2:
        # floor-dominated rows fluctuate like a scaled chi-square, whose log
        # has standard deviation near sqrt(psi_1(1)) = 1.28; the delta-method
        # relative error understates that, so take the larger of the two
        log_se = ses[pos] / ests[pos]
        floor_rows = np.array([r.noise_floor for r in out_rows])[pos]
        log_se = np.where(floor_rows, np.maximum(log_se, 1.3), log_se)
        slope, slope_se = _wls_line(n_arr[pos], np.log(ests[pos]), log_se)
        ratio = math.exp(slope)
        ratio_se = ratio * slope_se
    else:
        ratio, ratio_se = math.nan, math.inf
    ratio_ok = bool(ratio + 3.0 * ratio_se < 1.0) if math.isfinite(ratio) \
        else False
    below = bool(np.all(ests <= np.array([r.envelope for r in out_rows])
                        + 3.0 * ses))
    return FiniteSpeedReport(
        rows=out_rows, sigma=sigma, tau=tau_cap, gamma_f_sup=gamma_f,
        fitted_ratio=ratio, ratio_se=ratio_se,
        strictly_decreasing=decreasing, ratio_ok=ratio_ok,
        below_envelope=below,
        passed=decreasing and ratio_ok and below,
        constants=consts, n_flagged=flagged, s=float(s))


# -- truncation convergence ----------------------------------------------------


@dataclass
class CauchyRow:
    radius_small: int
    radius_large: int
    n_tilde: int
    d_n: float
    std_error: float
    exact_zero: bool


@dataclass
class CauchyReport:
    rows: List[CauchyRow]
    slope: float
    slope_se: float
    decreasing: bool
    slope_ok: bool
    all_exact_zero: bool
    verdict: str          # "pass" | "fail" | "inconclusive" | "decoupled-exact"
    t: float


def cauchy_convergence_test(spec: LatticeSpec, f: CylinderFunction, t: float,
                            box_radii: Sequence[int], cfg: SimConfig,
                            probes: np.ndarray | None = None,
                            n_probes: int = 3) -> CauchyReport:
    """Paired-seed truncation differences D_n = max over probes of
    |P_t^{Lambda_{n+1}} f - P_t^{Lambda_n} f| across nested boxes.

    All boxes reuse the same per-site streams, so the difference estimator is
    a common-random-number coupling; with the interaction off the runs are
    bit-identical and every D_n is exactly zero.  Rows whose mean sits below
    its own 3 SE line are magnitude readings of the coupling's collapse scale
    rather than resolved means; the log fit widens their error to the
    half-normal log spread, and the verdict separates fail (a resolved rise
    or a significantly positive slope) from inconclusive.
    """
    radii = sorted(int(r) for r in box_radii)
    if len(radii) < 2:
        raise ValueError("need at least two nested boxes")
    f_sites = [tuple(q) for q in f.sites]
    if max((_l1(q) for q in f_sites), default=0) > radii[0]:
        raise ValueError("observable support must fit the smallest box")

    big = spec.with_box(radii[-1])
    if probes is None:
        probes = default_probe_windows(big, n_probes, cfg.seed)
    vals, flag_list = [], []
    for r in radii:
        spec_r = spec.with_box(r)
        idx = np.array([big.site_index[s] for s in spec_r.window_sites],
                       dtype=int)
        st, fl = simulate_window(spec_r, probes[:, idx, :], [float(t)], cfg,
                                 f_sites=f_sites)
        vals.append(f.values(st[0], spec_r))
        flag_list.append(fl)

    rows = []
    for i in range(len(radii) - 1):
        good = ~(flag_list[i] | flag_list[i + 1])
        n_good = int(good.sum())
        if n_good == 0:
            raise ArithmeticError("all replicas flagged in a box pair")
        diffs = vals[i + 1][:, good] - vals[i][:, good]    # (P, n_good)
        means = diffs.mean(axis=1)
        ses = diffs.std(axis=1, ddof=1) / math.sqrt(n_good) if n_good > 1 \
            else np.zeros(len(means))
        j = int(np.argmax(np.abs(means)))
        exterior_dist = radii[i] + 1 - max(_l1(q) for q in f_sites)
        n_tilde = exterior_dist // spec.range_R + 1
        rows.append(CauchyRow(radii[i], radii[i + 1], n_tilde,
                              float(np.abs(means[j])), float(ses[j]),
                              bool(np.all(diffs == 0.0))))

    all_zero = all(r.exact_zero for r in rows)
    d = np.array([r.d_n for r in rows])
    se = np.array([r.std_error for r in rows])
    nt = np.array([r.n_tilde for r in rows], dtype=float)
    decreasing = bool(np.all(np.diff(d) < 0.0))
    if all_zero:
        return CauchyReport(rows, 0.0, 0.0, True, True, True,
                            "decoupled-exact", float(t))
    nonzero = d > 0.0
    if nonzero.sum() < 2:
        return CauchyReport(rows, math.nan, math.inf, decreasing, False,
                            False, "inconclusive", float(t))
    # rows below their own 3 SE line fluctuate like |N(~0, se)|, whose log
    # has standard deviation 1.11; keep the fit honest there by flooring the
    # delta-method relative error at that value
    rel = se[nonzero] / d[nonzero]
    log_se = np.where(d[nonzero] > 3.0 * se[nonzero], rel,
                      np.maximum(rel, 1.11))
    slope, slope_se = _wls_line(nt[nonzero], np.log(d[nonzero]), log_se)
    slope_ok = bool(slope + 3.0 * slope_se <= 0.0)
    pair_se = np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    rises = bool(np.any(np.diff(d) > 3.0 * pair_se))
    if decreasing and slope_ok:
        verdict = "pass"
    elif rises or (math.isfinite(slope) and slope - 3.0 * slope_se > 0.0):
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return CauchyReport(rows, slope, slope_se, decreasing, slope_ok,
                        False, verdict, float(t))


# -- Lyapunov stability of the window dynamics ----------------------------------


@dataclass
class InfiniteLyapunovReport:
    c1: float
    c2: float
    e_term_bound: float
    weight_sum: float
    audit_ok: bool
    witness: tuple | None
    rows: list               # (t, mean, se, bound, ok)
    bound: float
    passed: bool
    n_flagged: int


def infinite_lyapunov_check(spec: LatticeSpec, t_grid: Sequence[float],
                            cfg: SimConfig, c2: float = 0.5,
                            omega0: np.ndarray | None = None,
                            probes: np.ndarray | None = None,
                            n_probes: int = 32,
                            r_max: float = 50.0) -> InfiniteLyapunovReport:
    """Weighted-coercivity check: rho(omega) = sum_l a_l |omega_l| chi(|omega_l|)
    with summable weights a_l = (1+|l|_1)^{-(d+1)}.

    Audits the sitewise inequality L^(l) rho_l + e^(l).grad rho_l <=
    C_1 - C_2 rho_l at probe configurations (C_1 fitted from the radial
    closed form plus the interaction bound), then simulates and checks
    E[rho(omega_t)] <= rho(omega_0) + C_1 sum_l a_l / C_2 + 3 SE.
    """
    if spec.site_drift.kind != "linear":
        raise ValueError("the radial closed form covers the linear drift")
    c = float(spec.site_drift.c)
    inter = spec.interaction
    lyap = LyapunovSpec(spec.N, spec.gamma, c2)
    r_grid = np.linspace(0.0, r_max, 2001)
    ch, ch1, _ = chi_derivatives(r_grid)
    w_prime_sup = float(np.max(np.abs(ch + r_grid * ch1)))
    e_bound = inter.eps0 * inter.u_sup * inter.v_sup * w_prime_sup
    c1 = float(np.max(lyap.generator_radial(r_grid, c) + e_bound
                      + c2 * lyap.rho_radial(r_grid)))

    # sitewise audit at probes: radial closed form + the actual e-term
    if probes is None:
        probes = default_probe_windows(spec, n_probes, cfg.seed)
    audit_ok, witness = True, None
    for l in spec.box_sites:
        li = spec.site_index[l]
        x = probes[:, li, :]
        r = np.linalg.norm(x, axis=-1)
        gen_rad = lyap.generator_radial(r, c)
        ch_p, ch1_p, _ = chi_derivatives(r)
        wp = ch_p + r * ch1_p
        e_val = interaction_at(spec, probes, l)
        grad_rho = wp[:, None] * x / np.maximum(r, 1e-300)[:, None]
        lhs = gen_rad + np.einsum("pn,pn->p", e_val, grad_rho)
        slack = c1 - c2 * lyap.rho_radial(r) - lhs
        if float(slack.min()) < -1e-9:
            audit_ok = False
            witness = (l, tuple(x[int(np.argmin(slack))]))
            break

    weight_sum = _profile_sum(spec.d, spec.d + 1)
    if omega0 is None:
        excited = spec.box_sites[-1]
        omega0 = fill_window(spec, 0.2,
                             {excited: np.full(spec.N, 10.0 / math.sqrt(spec.N))})
    omega0 = np.asarray(omega0, dtype=float)
    a_w = np.array([(1.0 + _l1(s)) ** (-(spec.d + 1))
                    for s in spec.window_sites])

    def rho_weighted(states):
        r = np.linalg.norm(states, axis=-1)           # (P, R, n_w)
        return np.einsum("prw,w->pr", lyap.rho_radial(r), a_w)

    rho0 = float(rho_weighted(omega0[None, None])[0, 0])
    bound = rho0 + c1 * weight_sum / c2
    states, flags = simulate_window(spec, omega0, list(t_grid), cfg)
    good = ~flags
    n_good = int(good.sum())
    rows, ok_all = [], True
    for tv, st in zip(t_grid, states):
        vals = rho_weighted(st)[0, good]
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n_good)) if n_good > 1 else 0.0
        ok = mean <= bound + 3.0 * se
        ok_all = ok_all and ok
        rows.append((float(tv), mean, se, bound, ok))
    return InfiniteLyapunovReport(c1, c2, e_bound, weight_sum, audit_ok,
                                  witness, rows, bound,
                                  audit_ok and ok_all, int(flags.sum()))


# -- coalescence of initial conditions ------------------------------------------


@dataclass
class ErgodicityReport:
    rows: list               # (t, delta, se)
    rate: float
    rate_se: float
    c_omega: float
    c_omega_prime: float
    identical: bool
    ergodic_mode: bool       # constants satisfy the coalescence hypotheses
    passed: bool             # fitted rate negative beyond 3 SE
    n_flagged: int


def ergodicity_test(spec: LatticeSpec, f: CylinderFunction, omega,
                    omega_prime, t_grid: Sequence[float],
                    cfg: SimConfig) -> ErgodicityReport:
    """Coalescence of P_t^Lambda f from two initial configurations under the
    common-random-number coupling; Delta(t) = |paired mean difference| with a
    weighted exponential-rate fit.  Identical inputs stay glued bitwise."""
    omega = np.asarray(omega, dtype=float)
    omega_prime = np.asarray(omega_prime, dtype=float)
    identical = bool(np.array_equal(omega, omega_prime))
    consts = compute_constants(spec)
    weights = np.array([(1.0 + _l1(s)) ** (-(spec.d + 1))
                        for s in spec.window_sites])
    c_om = float(np.sum(weights * np.linalg.norm(omega, axis=-1)))
    c_omp = float(np.sum(weights * np.linalg.norm(omega_prime, axis=-1)))

    states, flags = simulate_window(spec, np.stack([omega, omega_prime]),
                                    list(t_grid), cfg, f_sites=f.sites)
    good = ~flags
    n_good = int(good.sum())
    if n_good == 0:
        raise ArithmeticError("all replicas flagged; no estimate available")
    rows = []
    for tv, st in zip(t_grid, states):
        vals = f.values(st, spec)[:, good]
        diffs = vals[0] - vals[1]
        mean = float(diffs.mean())
        se = float(diffs.std(ddof=1) / math.sqrt(n_good)) if n_good > 1 else 0.0
        rows.append((float(tv), abs(mean), se))

    d = np.array([r[1] for r in rows])
    se = np.array([r[2] for r in rows])
    t_arr = np.array([r[0] for r in rows])
    signal = d > 3.0 * se
    if identical or signal.sum() < 2:
        rate, rate_se = math.nan, math.inf
    else:
        rate, rate_se = _wls_line(t_arr[signal],
                                  np.log(d[signal]), se[signal] / d[signal])
    passed = bool(math.isfinite(rate) and rate + 3.0 * rate_se < 0.0)
    return ErgodicityReport(rows, rate, rate_se, c_om, c_omp, identical,
                            consts.ergodic_ok, passed, int(flags.sum()))


def decoupled_rate_1d(spec: LatticeSpec) -> float:
    """Coordinate decay rate -c(1 + 2k) of a free scalar site."""
    if spec.N != 1:
        raise ValueError("closed-form coordinate rate needs N = 1")
    c = float(spec.site_drift.c)
    return -c * (1.0 + 2.0 * spec.gamma)


# -- model audits ---------------------------------------------------------------


@dataclass
class InteractionAudit:
    stencil_max: float
    equivariance_max: float
    locality_max: float
    worst_rate: float
    stencil_ok: bool
    equivariance_ok: bool
    locality_ok: bool
    rates_ok: bool
    n_probes: int

    @property
    def passed(self) -> bool:
        return (self.stencil_ok and self.equivariance_ok
                and self.locality_ok and self.rates_ok)


def audit_interaction(spec: LatticeSpec, n_probes: int = 1000,
                      seed: int = 0) -> InteractionAudit:
    """Probe the model invariants.

    - stencil: perturbing any site at distance >= range leaves e^(l)
      unchanged bitwise;
    - equivariance: e^(l)(g^(l) omega) = g e^(l)(omega);
    - locality: e^(lbar)(g^(l) omega) = e^(lbar)(omega) for lbar != l
      (exact up to the float roundoff of |g omega_l|^2);
    - jump rates of the perturbed site generator are nonnegative.
    """
    probes = default_probe_windows(spec, n_probes, seed)
    gen = stream_for(seed, PROBE_TAG + 2)
    group = spec.group_np
    box = spec.box_sites
    st_max = eq_max = loc_max = 0.0
    worst_rate = math.inf

    for _ in range(64):
        l = box[int(gen.integers(len(box)))]
        li = spec.site_index[l]
        g = group[int(gen.integers(len(group)))]
        e_base = interaction_at(spec, probes, l)

        # stencil: far-site perturbation is invisible
        far = [s for s in spec.window_sites
               if site_distance(s, l) >= spec.range_R]
        if far:
            fs = far[int(gen.integers(len(far)))]
            pert = probes.copy()
            pert[:, spec.site_index[fs], :] += 1.7
            st_max = max(st_max, float(np.max(np.abs(
                interaction_at(spec, pert, l) - e_base))))

        # equivariance at l
        rotated = probes.copy()
        rotated[:, li, :] = probes[:, li, :] @ g.T
        eq_max = max(eq_max, float(np.max(np.abs(
            interaction_at(spec, rotated, l) - e_base @ g.T))))

        # locality: rotating site l leaves neighbouring interactions alone
        others = [s for s in box if s != l]
        if others:
            lbar = others[int(gen.integers(len(others)))]
            loc_max = max(loc_max, float(np.max(np.abs(
                interaction_at(spec, rotated, lbar)
                - interaction_at(spec, probes, lbar)))))

    # rate nonnegativity of -c omega_l + e^(l) at the probes
    k = spec.ctx.root.k_np if spec.ctx.root.scalar_mode == "float" \
        else spec.ctx.root.to_float().k_np
    c = float(spec.site_drift.c)
    for l in box:
        li = spec.site_index[l]
        x = probes[:, li, :]
        b = -c * x + interaction_at(spec, probes, l)
        ap = x @ spec.roots_np.T
        bp = b @ spec.roots_np.T
        rates = k * (2.0 / ap ** 2 - bp / ap)
        worst_rate = min(worst_rate, float(rates.min()))

    return InteractionAudit(
        stencil_max=st_max, equivariance_max=eq_max, locality_max=loc_max,
        worst_rate=worst_rate,
        stencil_ok=st_max == 0.0,
        equivariance_ok=eq_max <= 1e-12,
        locality_ok=loc_max <= 1e-12,
        rates_ok=worst_rate >= -1e-9,
        n_probes=n_probes)
