"""Finite root systems, their reflection groups and invariant multiplicities.

Roots are normalised to squared length 2, so the reflection along alpha acts as
``x -> x - <alpha, x> alpha``.  The catalog covers the A, B, D families and the
dihedral systems I2(m).  A and D systems have rational coordinates; the rank-one
system and the short B roots carry sqrt(2) and stay exact in Q(sqrt2).  I2(m)
is floating point except m in {2, 4}.

The positive subsystem is selected by sign of the inner product with a fixed
generic vector whose entries decrease with the coordinate index, so e_i - e_j
is positive for i < j.
"""

from __future__ import annotations

from fractions import Fraction
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ._scalar import QSqrt2, SQRT2

GROUP_CAP = 10_000
_HASH_DECIMALS = 12

Vec = Tuple[object, ...]
Mat = Tuple[Vec, ...]


class RootSystemError(ValueError):
    pass


def dot(u: Sequence, v: Sequence):
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    total = None
    for a, b in zip(u, v):
        p = a * b
        total = p if total is None else total + p
    return total


def reflect(alpha: Sequence, x: Sequence):
    """Reflection of x in the hyperplane orthogonal to alpha (|alpha|^2 = 2)."""
    c = dot(alpha, x)
    return tuple(xi - c * ai for xi, ai in zip(x, alpha))


def reflection_matrix(alpha: Sequence, mode: str) -> Mat:
    n = len(alpha)
    if mode == "exact":
        one, zero = QSqrt2(1), QSqrt2(0)
        alpha = tuple(QSqrt2.coerce(a) for a in alpha)
    else:
        one, zero = 1.0, 0.0
        alpha = tuple(float(a) for a in alpha)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            base = one if i == j else zero
            row.append(base - alpha[i] * alpha[j])
        rows.append(tuple(row))
    return tuple(rows)


def mat_mul(a: Mat, b: Mat) -> Mat:
    n = len(a)
    return tuple(
        tuple(sum((a[i][k] * b[k][j] for k in range(n)),
                  start=a[i][0] * 0)
              for j in range(n))
        for i in range(n)
    )


def mat_apply(m: Mat, x: Sequence) -> Vec:
    return tuple(dot(row, x) for row in m)


def _key_vec(v: Sequence, mode: str):
    if mode == "exact":
        return tuple((c.a, c.b) for c in v)
    return tuple(round(float(c), _HASH_DECIMALS) + 0.0 for c in v)


def _key_mat(m: Mat, mode: str):
    return tuple(_key_vec(row, mode) for row in m)


def _closure(gens, identity, key_fn, mul, cap):
    seen = {key_fn(identity): identity}
    frontier = [identity]
    while frontier:
        new_frontier = []
        for m in frontier:
            for g in gens:
                prod = mul(g, m)
                key = key_fn(prod)
                if key not in seen:
                    if len(seen) >= cap:
                        raise RootSystemError(
                            f"group closure exceeded cap {cap}; "
                            "input is not a finite root system")
                    seen[key] = prod
                    new_frontier.append(prod)
        frontier = new_frontier
    return tuple(seen.values())


def _as_int_mat(m: Mat) -> Mat | None:
    rows = []
    for row in m:
        out = []
        for c in row:
            if isinstance(c, QSqrt2):
                if c.b != 0 or c.a.denominator != 1:
                    return None
                out.append(c.a.numerator)
            else:
                return None
        rows.append(tuple(out))
    return tuple(rows)


def generate_group(roots: Sequence[Vec], mode: str, cap: int = GROUP_CAP) -> Tuple[Mat, ...]:
    """Closure of the reflections along the given roots under composition.

    Breadth-first multiplication with hashing (exact entries, or entries rounded
    to 12 decimals in float mode).  Exceeding the element cap signals that the
    input was not a root system.  Exact systems whose reflections are integer
    matrices (all of A, B, D) run the closure in plain integer arithmetic.
    """
    n = len(roots[0])
    gens = [reflection_matrix(a, mode) for a in roots]
    if mode == "exact":
        int_gens = [_as_int_mat(g) for g in gens]
        if all(g is not None for g in int_gens):
            identity = tuple(tuple(1 if i == j else 0 for j in range(n))
                             for i in range(n))

            def int_mul(a, b):
                return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(n))
                                   for j in range(n)) for i in range(n))

            group = _closure(int_gens, identity, lambda m: m, int_mul, cap)
            return tuple(tuple(tuple(QSqrt2(c) for c in row) for row in g)
                         for g in group)
        identity = tuple(tuple(QSqrt2(1 if i == j else 0) for j in range(n))
                         for i in range(n))
        return _closure(gens, identity, lambda m: _key_mat(m, mode), mat_mul, cap)
    identity = tuple(tuple(1.0 if i == j else 0.0 for j in range(n))
                     for i in range(n))
    return _closure(gens, identity, lambda m: _key_mat(m, mode), mat_mul, cap)


def _root_orbits(roots: Sequence[Vec], mode: str) -> List[List[int]]:
    """Partition root indices into orbits under the generated reflection group."""
    index = {_key_vec(r, mode): i for i, r in enumerate(roots)}
    unassigned = set(range(len(roots)))
    orbits = []
    while unassigned:
        seed = min(unassigned)
        orbit = {seed}
        frontier = [seed]
        while frontier:
            nxt = []
            for i in frontier:
                for a in roots:
                    j = index.get(_key_vec(reflect(a, roots[i]), mode))
                    if j is None:
                        raise RootSystemError(
                            f"reflection along {a} maps {roots[i]} outside "
                            "the root set; the set is not closed")
                    if j not in orbit:
                        orbit.add(j)
                        nxt.append(j)
            frontier = nxt
        orbits.append(sorted(orbit))
        unassigned -= orbit
    return orbits


class RootSystemContext:
    """A validated root system with group, positive subsystem and multiplicities.

    Treat instances as immutable.  ``positive_roots``, ``multiplicities`` and
    ``orbit_of_positive`` are aligned tuples; ``gamma`` is the sum of the
    multiplicities over the positive subsystem.
    """

    def __init__(self, family: str, rank: int, roots: Sequence[Vec],
                 positive_roots: Sequence[Vec], multiplicities: Sequence,
                 orbit_of_positive: Sequence[int], group_elements: Sequence[Mat],
                 scalar_mode: str):
        self.family = family
        self.rank = rank
        self.n = len(roots[0])
        self.roots = tuple(tuple(r) for r in roots)
        self.positive_roots = tuple(tuple(r) for r in positive_roots)
        self.multiplicities = tuple(multiplicities)
        self.orbit_of_positive = tuple(orbit_of_positive)
        self.group_elements = tuple(group_elements)
        self.scalar_mode = scalar_mode
        self.gamma = sum(multiplicities, start=multiplicities[0] * 0)
        self._np_cache: dict = {}

    @property
    def label(self) -> str:
        if self.family == "I2":
            return f"I2({self.rank})"
        return f"{self.family}{self.rank}"

    def k_of(self, alpha: Sequence):
        """Multiplicity of a root (either sign)."""
        key = _key_vec(tuple(alpha), self.scalar_mode)
        neg = _key_vec(tuple(-a for a in alpha), self.scalar_mode)
        for root, k in zip(self.positive_roots, self.multiplicities):
            rk = _key_vec(root, self.scalar_mode)
            if rk == key or rk == neg:
                return k
        raise KeyError(f"{alpha} is not a root of {self.label}")

    # numpy views used by the simulation layer ------------------------------

    def _np(self, name: str):
        cache = self._np_cache
        if name not in cache:
            cache["pos_roots"] = np.array(
                [[float(c) for c in r] for r in self.positive_roots])
            cache["k"] = np.array([float(k) for k in self.multiplicities])
            cache["reflections"] = np.array(
                [[[float(c) for c in row] for row in reflection_matrix(r, self.scalar_mode)]
                 for r in self.positive_roots])
            cache["group"] = np.array(
                [[[float(c) for c in row] for row in g] for g in self.group_elements])
        return cache[name]

    @property
    def pos_roots_np(self) -> np.ndarray:
        return self._np("pos_roots")

    @property
    def k_np(self) -> np.ndarray:
        return self._np("k")

    @property
    def reflections_np(self) -> np.ndarray:
        return self._np("reflections")

    @property
    def group_np(self) -> np.ndarray:
        return self._np("group")

    def to_float(self) -> "RootSystemContext":
        if self.scalar_mode == "float":
            return self
        conv = lambda v: tuple(float(c) for c in v)
        return RootSystemContext(
            self.family, self.rank,
            [conv(r) for r in self.roots],
            [conv(r) for r in self.positive_roots],
            [float(k) for k in self.multiplicities],
            self.orbit_of_positive,
            [tuple(conv(row) for row in g) for g in self.group_elements],
            "float")

    def __repr__(self):
        return (f"RootSystemContext({self.label}, n={self.n}, "
                f"|R+|={len(self.positive_roots)}, |G|={len(self.group_elements)}, "
                f"gamma={self.gamma}, {self.scalar_mode})")


def _generic_vector(n: int, mode: str, salt: int = 0) -> Vec:
    # decreasing entries make e_i - e_j positive for i < j
    if mode == "exact":
        return tuple(QSqrt2(Fraction(1) + Fraction(n - 1 - i, 1000)
                            + Fraction(salt * (i * i + 1), 10 ** 7))
                     for i in range(n))
    return tuple(1.0 + (n - 1 - i) * 1e-3 + salt * (i * i + 1) * 1e-7
                 for i in range(n))


def _split_positive(roots: Sequence[Vec], mode: str) -> List[Vec]:
    n = len(roots[0])
    for salt in range(64):
        v = _generic_vector(n, mode, salt)
        pos = []
        degenerate = False
        for r in roots:
            s = dot(r, v)
            zero = (not s) if mode == "exact" else (abs(s) < 1e-12)
            if zero:
                degenerate = True
                break
            if float(s) > 0:
                pos.append(r)
        if not degenerate:
            if 2 * len(pos) != len(roots):
                raise RootSystemError("positive subsystem does not halve the roots; "
                                      "roots do not come in +- pairs")
            return pos
    raise RootSystemError("could not find a generic vector for the positive subsystem")


def _normalize_k(k, orbits: List[List[int]], roots: Sequence[Vec], family: str,
                 mode: str):
    """Expand the user's multiplicity argument to one value per orbit."""
    def conv(v):
        if mode == "float":
            return float(v)
        if isinstance(v, float):
            # decimal reading of the float (JSON configs): 0.1 -> 1/10
            v = Fraction(str(v))
        return QSqrt2.coerce(v)

    n_orbits = len(orbits)
    if isinstance(k, dict):
        if family != "B" or set(k) != {"long", "short"}:
            raise RootSystemError(
                "dict multiplicities are only supported for family B "
                "with keys {'long','short'}")
        per_orbit = []
        for orbit in orbits:
            nz = sum(1 for c in roots[orbit[0]] if float(c) != 0.0)
            per_orbit.append(conv(k["long"] if nz == 2 else k["short"]))
        return per_orbit
    if isinstance(k, (list, tuple)):
        if len(k) != n_orbits:
            raise RootSystemError(
                f"{len(k)} multiplicities given but the system has {n_orbits} orbits")
        return [conv(v) for v in k]
    return [conv(k)] * n_orbits


def _assemble(family: str, rank: int, roots: List[Vec], k, mode: str) -> RootSystemContext:
    for r in roots:
        s = dot(r, r)
        if mode == "exact":
            if s != 2:
                raise RootSystemError(f"root {r} has squared length {s}, expected 2")
        elif abs(float(s) - 2.0) > 1e-9:
            raise RootSystemError(f"root {r} has squared length {float(s)}, expected 2")

    orbits = _root_orbits(roots, mode)
    per_orbit_k = _normalize_k(k, orbits, roots, family, mode)
    for v in per_orbit_k:
        if float(v) < 0:
            raise RootSystemError("multiplicities must be nonnegative")

    orbit_of_root = {}
    for oi, orbit in enumerate(orbits):
        for i in orbit:
            orbit_of_root[i] = oi

    group = generate_group(roots, mode)
    positive = _split_positive(roots, mode)
    root_index = {_key_vec(r, mode): i for i, r in enumerate(roots)}
    pos_orbit = [orbit_of_root[root_index[_key_vec(r, mode)]] for r in positive]
    mults = [per_orbit_k[oi] for oi in pos_orbit]

    ctx = RootSystemContext(family, rank, roots, positive, mults, pos_orbit,
                            group, mode)
    validate_root_system(ctx)
    return ctx


def build_standard(family: str, rank: int, k, scalar_mode: str | None = None
                   ) -> RootSystemContext:
    """Catalog constructor: families A (rank >= 1), B (>= 2), D (>= 2), I2(m >= 2).

    ``k`` is a scalar, a per-orbit list, or for family B a dict with keys
    'long'/'short'.  A, B, D default to exact mode; I2 defaults to float and
    admits exact mode only for m in {2, 4}.
    """
    family = family.upper() if family.lower() != "i2" else "I2"
    if family == "A":
        if rank < 1:
            raise RootSystemError("family A needs rank >= 1")
        mode = scalar_mode or "exact"
        if rank == 1:
            roots = [(SQRT2,), (-SQRT2,)] if mode == "exact" else \
                [(math.sqrt(2),), (-math.sqrt(2),)]
            return _assemble("A", 1, roots, k, mode)
        n = rank + 1
        roots = []
        one = QSqrt2(1) if mode == "exact" else 1.0
        zero = QSqrt2(0) if mode == "exact" else 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    roots.append(tuple(one if t == i else (-one if t == j else zero)
                                       for t in range(n)))
        return _assemble("A", rank, roots, k, mode)

    if family in ("B", "D"):
        if rank < 2:
            raise RootSystemError(f"family {family} needs rank >= 2")
        mode = scalar_mode or "exact"
        n = rank
        one = QSqrt2(1) if mode == "exact" else 1.0
        zero = QSqrt2(0) if mode == "exact" else 0.0
        roots = []
        for i in range(n):
            for j in range(i + 1, n):
                for si in (one, -one):
                    for sj in (one, -one):
                        roots.append(tuple(si if t == i else (sj if t == j else zero)
                                           for t in range(n)))
        if family == "B":
            rt2 = SQRT2 if mode == "exact" else math.sqrt(2)
            for i in range(n):
                for s in (rt2, -rt2):
                    roots.append(tuple(s if t == i else zero for t in range(n)))
        return _assemble(family, rank, roots, k, mode)

    if family == "I2":
        m = rank
        if m < 2:
            raise RootSystemError("I2(m) needs m >= 2")
        mode = scalar_mode or "float"
        if mode == "exact":
            if m not in (2, 4):
                raise RootSystemError(
                    f"I2({m}) has irrational roots; exact mode is only "
                    "available for m in {2, 4}")
            half = Fraction(1, 2)
            exact_cs = {0: (QSqrt2(1), QSqrt2(0)),
                        45: (QSqrt2(0, half), QSqrt2(0, half)),
                        90: (QSqrt2(0), QSqrt2(1)),
                        135: (QSqrt2(0, -half), QSqrt2(0, half))}
            roots = []
            for j in range(2 * m):
                deg = (180 * j // m) % 360
                base = exact_cs.get(deg % 180)
                c, s = base
                if deg >= 180:
                    c, s = -c, -s
                roots.append((SQRT2 * c, SQRT2 * s))
            return _assemble("I2", m, roots, k, mode)
        roots = []
        for j in range(2 * m):
            theta = j * math.pi / m
            roots.append((math.sqrt(2) * math.cos(theta),
                          math.sqrt(2) * math.sin(theta)))
        return _assemble("I2", m, roots, k, mode)

    raise RootSystemError(f"unknown family {family!r}; catalog has A, B, D, I2")


def build_from_roots(roots: Sequence[Sequence], k, scalar_mode: str = "float"
                     ) -> RootSystemContext:
    """Validated context from explicit roots (user-supplied systems).

    Float-mode roots are rescaled to squared length 2; exact mode requires the
    normalisation already.  Roots may be given as a full system or just a
    positive half (negatives are added).
    """
    if scalar_mode == "exact":
        vecs = [tuple(QSqrt2.coerce(Fraction(str(c)) if isinstance(c, float) else c)
                      for c in r) for r in roots]
    else:
        vecs = []
        for r in roots:
            v = tuple(float(c) for c in r)
            s = math.sqrt(float(dot(v, v)))
            if s == 0:
                raise RootSystemError("zero vector supplied as root")
            vecs.append(tuple(c * math.sqrt(2) / s for c in v))
    keys = {_key_vec(v, scalar_mode) for v in vecs}
    full = list(vecs)
    for v in vecs:
        neg = tuple(-c for c in v)
        if _key_vec(neg, scalar_mode) not in keys:
            keys.add(_key_vec(neg, scalar_mode))
            full.append(neg)
    return _assemble("user", len(full[0]), full, k, scalar_mode)


def validate_root_system(ctx: RootSystemContext) -> None:
    """Check the root system axioms and multiplicity invariance; raise on failure."""
    mode = ctx.scalar_mode
    keys = {_key_vec(r, mode) for r in ctx.roots}
    if len(keys) != len(ctx.roots):
        raise RootSystemError("duplicate roots")

    rmat = np.array([[float(c) for c in r] for r in ctx.roots])
    if np.min(np.einsum("ij,ij->i", rmat, rmat)) < 1e-12:
        raise RootSystemError("zero vector among roots")
    # R cap span{alpha} = {+-alpha}: with every |alpha|^2 = 2, parallel roots
    # have |<r,s>| = 2, which forces s = +-r
    gram = rmat @ rmat.T
    par_i, par_j = np.nonzero(np.abs(np.abs(gram) - 2.0) < 1e-9)
    for i, j in zip(par_i, par_j):
        if not (np.allclose(rmat[j], rmat[i], atol=1e-9)
                or np.allclose(rmat[j], -rmat[i], atol=1e-9)):
            raise RootSystemError(
                f"roots {ctx.roots[i]} and {ctx.roots[j]} are parallel but not +-")

    for a in ctx.roots:
        for r in ctx.roots:
            if _key_vec(reflect(a, r), mode) not in keys:
                raise RootSystemError(
                    f"reflection along {a} does not stabilise the root set")

    pos_keys = {_key_vec(r, mode) for r in ctx.positive_roots}
    neg_keys = {_key_vec(tuple(-c for c in r), mode) for r in ctx.positive_roots}
    if pos_keys & neg_keys or (pos_keys | neg_keys) != keys:
        raise RootSystemError("positive roots and their negatives must partition R")

    # multiplicity must be constant on orbits
    for a in ctx.roots:
        for r, k in zip(ctx.positive_roots, ctx.multiplicities):
            image = reflect(a, r)
            if float(dot(image, image)) > 0:
                k_img = ctx.k_of(image)
                if mode == "exact":
                    if k_img != k:
                        raise RootSystemError("multiplicity not G-invariant")
                elif abs(float(k_img) - float(k)) > 1e-12:
                    raise RootSystemError("multiplicity not G-invariant")


def context_from_config(block: Dict) -> RootSystemContext:
    """Build a context from the JSON descriptor block.

    Two forms: ``{"family": "A", "rank": 2, "k": ...}`` or
    ``{"roots": [[...], ...], "k": ..., "scalar_mode": "float"}``.  Multiplicity
    values may be numbers (read decimally, so 0.1 means 1/10 in exact mode) or
    strings like "1/3".
    """
    def conv_k(v):
        if isinstance(v, str):
            return Fraction(v)
        if isinstance(v, list):
            return [conv_k(x) for x in v]
        if isinstance(v, dict):
            return {key: conv_k(x) for key, x in v.items()}
        return v

    if "roots" in block:
        return build_from_roots(block["roots"], conv_k(block["k"]),
                                block.get("scalar_mode", "float"))
    return build_standard(block["family"], int(block["rank"]), conv_k(block["k"]),
                          block.get("scalar_mode"))
