"""Exact arithmetic over the quadratic field Q(sqrt 2).

Catalog root systems of type A and D have rational root coordinates, but the
rank-one system and the short roots of type B carry a factor sqrt(2) once roots
are normalised to squared length 2.  Elements a + b*sqrt(2) with rational a, b
form a field, so every reflection, inner product and difference quotient that
the symbolic layer performs stays exactly representable.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

_SQRT2_FLOAT = 2.0 ** 0.5

RationalLike = Union[int, Fraction, "QSqrt2"]


class QSqrt2:
    """A number a + b*sqrt(2) with a, b rational, supporting field arithmetic."""

    __slots__ = ("a", "b")

    def __init__(self, a: int | Fraction = 0, b: int | Fraction = 0):
        self.a = a if isinstance(a, Fraction) else Fraction(a)
        self.b = b if isinstance(b, Fraction) else Fraction(b)

    @staticmethod
    def coerce(value: RationalLike) -> "QSqrt2":
        if isinstance(value, QSqrt2):
            return value
        if isinstance(value, (int, Fraction)):
            return QSqrt2(value)
        raise TypeError(
            f"cannot coerce {type(value).__name__} into Q(sqrt2); "
            "use int or Fraction (floats are refused to keep arithmetic exact)"
        )

    def __add__(self, other):
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __sub__(self, other):
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        return QSqrt2.coerce(other).__sub__(self)

    def __mul__(self, other):
        other = QSqrt2.coerce(other)
        # (a + b r)(c + d r) = ac + 2bd + (ad + bc) r,  r^2 = 2
        return QSqrt2(
            self.a * other.a + 2 * self.b * other.b,
            self.a * other.b + self.b * other.a,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = QSqrt2.coerce(other)
        norm = other.a * other.a - 2 * other.b * other.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt2)")
        # multiply by the conjugate (a - b r) / (a^2 - 2 b^2)
        inv = QSqrt2(other.a / norm, -other.b / norm)
        return self * inv

    def __rtruediv__(self, other):
        return QSqrt2.coerce(other).__truediv__(self)

    def __neg__(self):
        return QSqrt2(-self.a, -self.b)

    def __pos__(self):
        return self

    def __abs__(self):
        return self if float(self) >= 0 else -self

    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        try:
            other = QSqrt2.coerce(other)
        except TypeError:
            return NotImplemented
        return self.a == other.a and self.b == other.b

    def __hash__(self):
        # rationals must hash like their Fraction value so dict keys interoperate
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        return float(self.a) + float(self.b) * _SQRT2_FLOAT

    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self!r} is irrational, no Fraction value")
        return self.a

    def __repr__(self):
        if self.b == 0:
            return f"QSqrt2({self.a})"
        return f"QSqrt2({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        if self.a == 0:
            return f"{self.b}*sqrt2"
        return f"{self.a}{'+' if self.b > 0 else '-'}{abs(self.b)}*sqrt2"


ZERO = QSqrt2(0)
ONE = QSqrt2(1)
SQRT2 = QSqrt2(0, 1)
