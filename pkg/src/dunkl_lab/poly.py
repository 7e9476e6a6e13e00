"""Sparse multivariate polynomials over exact or floating scalars.

A polynomial is a map from exponent tuples to nonzero coefficients.  Two scalar
modes exist:

* ``"exact"``  -- coefficients in Q(sqrt2) (:class:`dunkl_lab._scalar.QSqrt2`);
  every operation, including division by a linear form, is exact and equality
  means literal zero difference.
* ``"float"``  -- double precision; comparisons use an absolute tolerance of
  1e-10 unless the caller passes another.

Total degree is capped at 32: the symbolic layer only ever needs low degrees,
and the cap turns an accidental dense blow-up into an immediate error instead
of a hang.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Sequence, Tuple

from ._scalar import QSqrt2

Exponent = Tuple[int, ...]

DEGREE_CAP = 32
FLOAT_TOL = 1e-10


class DegreeCapError(ValueError):
    """Raised when an operation would produce total degree above DEGREE_CAP."""


class ExactDivisionError(ArithmeticError):
    """Raised when divide_by_linear_form is applied to a non-divisible input."""


def _coerce_scalar(value, mode: str):
    if mode == "exact":
        return QSqrt2.coerce(value)
    return float(value)


def _scalar_is_zero(value, mode: str) -> bool:
    if mode == "exact":
        return not value
    return value == 0.0


class MultiPoly:
    """Immutable-by-convention sparse polynomial in n_vars variables."""

    __slots__ = ("terms", "n_vars", "mode")

    def __init__(self, n_vars: int, terms: Dict[Exponent, object] | None = None,
                 mode: str = "exact"):
        if mode not in ("exact", "float"):
            raise ValueError(f"unknown scalar mode {mode!r}")
        self.n_vars = n_vars
        self.mode = mode
        clean: Dict[Exponent, object] = {}
        if terms:
            for exp, coeff in terms.items():
                exp = tuple(exp)
                if len(exp) != n_vars:
                    raise ValueError(f"exponent {exp} has wrong arity for n_vars={n_vars}")
                c = _coerce_scalar(coeff, mode)
                if not _scalar_is_zero(c, mode):
                    if sum(exp) > DEGREE_CAP:
                        raise DegreeCapError(
                            f"monomial degree {sum(exp)} exceeds cap {DEGREE_CAP}")
                    clean[exp] = c
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(n_vars: int, mode: str = "exact") -> "MultiPoly":
        return MultiPoly(n_vars, {}, mode)

    @staticmethod
    def const(n_vars: int, value, mode: str = "exact") -> "MultiPoly":
        return MultiPoly(n_vars, {(0,) * n_vars: value}, mode)

    @staticmethod
    def variable(i: int, n_vars: int, mode: str = "exact") -> "MultiPoly":
        exp = tuple(1 if j == i else 0 for j in range(n_vars))
        return MultiPoly(n_vars, {exp: 1}, mode)

    @staticmethod
    def linear_form(coeffs: Sequence, mode: str = "exact") -> "MultiPoly":
        """Polynomial <coeffs, x>."""
        n = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            exp = tuple(1 if j == i else 0 for j in range(n))
            terms[exp] = c
        return MultiPoly(n, terms, mode)

    # -- basic queries -------------------------------------------------------

    def is_zero(self, tol: float | None = None) -> bool:
        if self.mode == "exact":
            return not self.terms
        tol = FLOAT_TOL if tol is None else tol
        return all(abs(c) <= tol for c in self.terms.values())

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def max_abs_coeff(self) -> float:
        if not self.terms:
            return 0.0
        return max(abs(float(c)) for c in self.terms.values())

    def equals(self, other: "MultiPoly", tol: float | None = None) -> bool:
        return (self - other).is_zero(tol)

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        if self.mode != other.mode or self.n_vars != other.n_vars:
            return False
        if self.mode == "exact":
            return self.terms == other.terms
        return self.equals(other)

    def __hash__(self):
        raise TypeError("MultiPoly is not hashable")

    # -- ring operations -----------------------------------------------------

    def _check_compat(self, other: "MultiPoly"):
        if self.n_vars != other.n_vars:
            raise ValueError("mixed variable counts")
        if self.mode != other.mode:
            raise ValueError("mixed scalar modes; convert with to_float() first")

    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.const(self.n_vars, other, self.mode)
        self._check_compat(other)
        out = dict(self.terms)
        for exp, c in other.terms.items():
            acc = out.get(exp)
            s = c if acc is None else acc + c
            if _scalar_is_zero(s, self.mode):
                out.pop(exp, None)
            else:
                out[exp] = s
        res = MultiPoly.zero(self.n_vars, self.mode)
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self):
        res = MultiPoly.zero(self.n_vars, self.mode)
        res.terms = {e: -c for e, c in self.terms.items()}
        return res

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.const(self.n_vars, other, self.mode)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, value) -> "MultiPoly":
        c0 = _coerce_scalar(value, self.mode)
        if _scalar_is_zero(c0, self.mode):
            return MultiPoly.zero(self.n_vars, self.mode)
        res = MultiPoly.zero(self.n_vars, self.mode)
        res.terms = {e: c * c0 for e, c in self.terms.items()}
        return res

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            return self.scale(other)
        self._check_compat(other)
        if not self.terms or not other.terms:
            return MultiPoly.zero(self.n_vars, self.mode)
        if self.degree() + other.degree() > DEGREE_CAP:
            raise DegreeCapError(
                f"product degree {self.degree() + other.degree()} exceeds cap {DEGREE_CAP}")
        out: Dict[Exponent, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exp = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                acc = out.get(exp)
                s = c if acc is None else acc + c
                if _scalar_is_zero(s, self.mode):
                    out.pop(exp, None)
                else:
                    out[exp] = s
        res = MultiPoly.zero(self.n_vars, self.mode)
        res.terms = out
        return res

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        res = MultiPoly.const(self.n_vars, 1, self.mode)
        base = self
        while n:
            if n & 1:
                res = res * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n >>= 1
        return res

    # -- calculus and substitution -------------------------------------------

    def partial_derivative(self, i: int) -> "MultiPoly":
        out = {}
        for exp, c in self.terms.items():
            k = exp[i]
            if k == 0:
                continue
            new = list(exp)
            new[i] = k - 1
            out[tuple(new)] = c * k
        res = MultiPoly.zero(self.n_vars, self.mode)
        res.terms = out
        return res

    def eval(self, point: Sequence):
        """Evaluate at a point; scalars are coerced to the poly's mode."""
        vals = [_coerce_scalar(p, self.mode) for p in point]
        total = _coerce_scalar(0, self.mode)
        # cache powers per variable to avoid repeated multiplication
        powers: list[dict] = [{0: _coerce_scalar(1, self.mode)} for _ in range(self.n_vars)]

        def power(i, k):
            cache = powers[i]
            if k not in cache:
                cache[k] = power(i, k - 1) * vals[i]
            return cache[k]

        for exp, c in self.terms.items():
            term = c
            for i, k in enumerate(exp):
                if k:
                    term = term * power(i, k)
            total = total + term
        return total

    def eval_float(self, point: Sequence[float]) -> float:
        if self.mode == "float":
            return float(self.eval(point))
        total = 0.0
        for exp, c in self.terms.items():
            term = float(c)
            for i, k in enumerate(exp):
                if k:
                    term *= point[i] ** k
            total += term
        return total

    def compose_linear(self, matrix) -> "MultiPoly":
        """Substitute x -> M x, i.e. return f(M x).

        Reflection and rotation matrices of the catalog systems are signed
        permutations, for which substitution is a cheap exponent remap; the
        general path substitutes powers of linear forms.
        """
        rows = [list(r) for r in matrix]
        if len(rows) != self.n_vars or any(len(r) != self.n_vars for r in rows):
            raise ValueError("matrix shape does not match n_vars")
        rows = [[_coerce_scalar(v, self.mode) for v in r] for r in rows]

        perm = self._signed_permutation(rows)
        if perm is not None:
            col_of, sign_of = perm
            out = {}
            for exp, c in self.terms.items():
                new = [0] * self.n_vars
                flips = 0
                for i, k in enumerate(exp):
                    if k:
                        new[col_of[i]] += k
                        if sign_of[i] < 0 and (k & 1):
                            flips ^= 1
                cc = -c if flips else c
                key = tuple(new)
                acc = out.get(key)
                s = cc if acc is None else acc + cc
                if _scalar_is_zero(s, self.mode):
                    out.pop(key, None)
                else:
                    out[key] = s
            res = MultiPoly.zero(self.n_vars, self.mode)
            res.terms = out
            return res

        forms = [MultiPoly.linear_form(r, self.mode) for r in rows]
        pow_cache: list[dict] = [{} for _ in range(self.n_vars)]

        def form_power(i, k):
            if k == 0:
                return MultiPoly.const(self.n_vars, 1, self.mode)
            cache = pow_cache[i]
            if k not in cache:
                cache[k] = form_power(i, k - 1) * forms[i]
            return cache[k]

        res = MultiPoly.zero(self.n_vars, self.mode)
        for exp, c in self.terms.items():
            term = MultiPoly.const(self.n_vars, c, self.mode)
            for i, k in enumerate(exp):
                if k:
                    term = term * form_power(i, k)
            res = res + term
        return res

    def _signed_permutation(self, rows):
        n = self.n_vars
        col_of = [0] * n
        sign_of = [0] * n
        seen = set()
        for i, row in enumerate(rows):
            nz = [(j, v) for j, v in enumerate(row) if not _scalar_is_zero(v, self.mode)]
            if len(nz) != 1:
                return None
            j, v = nz[0]
            if self.mode == "float":
                if abs(v - 1.0) < 1e-15:
                    s = 1
                elif abs(v + 1.0) < 1e-15:
                    s = -1
                else:
                    return None
            else:
                if v == 1:
                    s = 1
                elif v == -1:
                    s = -1
                else:
                    return None
            if j in seen:
                return None
            seen.add(j)
            col_of[i] = j
            sign_of[i] = s
        return col_of, sign_of

    def divide_by_linear_form(self, alpha: Sequence) -> "MultiPoly":
        """Exact division by the linear form <alpha, x>.

        Synthetic division along the variable with the largest |alpha_i|; no
        basis change.  A nonzero remainder raises ExactDivisionError (float
        mode tolerates a remainder below 1e-10 relative to the input's largest
        coefficient).
        """
        coeffs = [_coerce_scalar(a, self.mode) for a in alpha]
        if all(_scalar_is_zero(c, self.mode) for c in coeffs):
            raise ZeroDivisionError("division by the zero form")
        pivot = max(range(self.n_vars), key=lambda i: abs(float(coeffs[i])))
        a_p = coeffs[pivot]
        ell = MultiPoly.linear_form(coeffs, self.mode)

        quotient = MultiPoly.zero(self.n_vars, self.mode)
        rem = self
        while True:
            if not rem.terms:
                break
            d = max(e[pivot] for e in rem.terms)
            if d == 0:
                break
            qt_terms = {}
            for exp, c in rem.terms.items():
                if exp[pivot] == d:
                    new = list(exp)
                    new[pivot] = d - 1
                    qt_terms[tuple(new)] = c / a_p
            qt = MultiPoly.zero(self.n_vars, self.mode)
            qt.terms = qt_terms
            quotient = quotient + qt
            rem = rem - qt * ell

        if self.mode == "exact":
            if rem.terms:
                raise ExactDivisionError(
                    f"nonzero remainder {rem.to_string()} dividing by {list(alpha)}")
        else:
            scale = max(1.0, self.max_abs_coeff())
            if rem.max_abs_coeff() > FLOAT_TOL * scale:
                raise ExactDivisionError(
                    f"remainder norm {rem.max_abs_coeff():.3e} too large "
                    f"(scale {scale:.3e}) dividing by {list(alpha)}")
        return quotient

    # -- conversions -----------------------------------------------------------

    def to_float(self) -> "MultiPoly":
        if self.mode == "float":
            return self
        return MultiPoly(self.n_vars, {e: float(c) for e, c in self.terms.items()},
                         "float")

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exp in sorted(self.terms, key=lambda e: (-sum(e), e)):
            c = self.terms[exp]
            factors = []
            for i, k in enumerate(exp):
                if k == 1:
                    factors.append(f"x{i + 1}")
                elif k > 1:
                    factors.append(f"x{i + 1}^{k}")
            cs = str(c)
            if factors and cs == "1":
                body = "*".join(factors)
            elif factors and cs == "-1":
                body = "-" + "*".join(factors)
            else:
                body = "*".join([cs] + factors) if factors else cs
            parts.append(body)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"MultiPoly({self.n_vars}, {self.mode}: {self.to_string()})"


def poly_from_string(text: str, n_vars: int, mode: str = "exact") -> MultiPoly:
    """Parse the textual syntax used in configs, e.g. ``2*x1^2*x2 - 1/3*x3``.

    Terms are separated by + and -, factors inside a term by ``*``; a factor is
    either a rational literal (``2``, ``1/3``, ``0.25``) or ``xI`` optionally
    followed by ``^E``.
    """
    s = text.replace(" ", "")
    if not s:
        raise ValueError("empty polynomial string")
    # split into signed terms
    terms = []
    start = 0
    for idx in range(1, len(s)):
        if s[idx] in "+-" and s[idx - 1] not in "+-*^/":
            terms.append(s[start:idx])
            start = idx
    terms.append(s[start:])

    result = MultiPoly.zero(n_vars, mode)
    for term in terms:
        sign = 1
        while term and term[0] in "+-":
            if term[0] == "-":
                sign = -sign
            term = term[1:]
        if not term:
            raise ValueError(f"dangling sign in {text!r}")
        coeff = Fraction(sign)
        exp = [0] * n_vars
        for factor in term.split("*"):
            if not factor:
                raise ValueError(f"empty factor in {text!r}")
            if factor[0] == "x":
                base, _, power = factor.partition("^")
                i = int(base[1:]) - 1
                if not 0 <= i < n_vars:
                    raise ValueError(f"variable {base} out of range for n_vars={n_vars}")
                exp[i] += int(power) if power else 1
            else:
                coeff *= Fraction(factor)
        mono = MultiPoly(n_vars, {tuple(exp): coeff if mode == "exact" else float(coeff)},
                         mode)
        result = result + mono
    return result
