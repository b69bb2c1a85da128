"""Exact arithmetic in Q and in real quadratic fields Q(sqrt(d)).

All geometric decisions in this package (point comparisons, interval
intersections, admissibility of words) reduce to sign tests on these
scalars, so every operation here is exact.  A scalar is ``a + b*sqrt(d)``
with ``a``, ``b`` rational; ``b == 0`` is normalised to the rational kind
so that values migrate freely between a quadratic field and its rational
subfield.  Mixing two distinct quadratic fields is an error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction


class FieldMismatchError(ValueError):
    """Combining scalars that live in distinct quadratic fields."""


class Ordering(Enum):
    LT = -1
    EQ = 0
    GT = 1


def is_square_free(n: int) -> bool:
    if n < 1:
        return False
    i = 2
    while i * i <= n:
        if n % (i * i) == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Ground field: the rationals or a real quadratic extension."""

    kind: str
    d: int | None = None

    def __post_init__(self):
        if self.kind == "rational":
            if self.d is not None:
                raise ValueError("rational field takes no radicand")
        elif self.kind == "quadratic":
            if not isinstance(self.d, int) or self.d < 2 or not is_square_free(self.d):
                raise ValueError("quadratic field needs a square-free radicand d >= 2")
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")

    @classmethod
    def rational(cls) -> "FieldSpec":
        return cls("rational")

    @classmethod
    def quadratic(cls, d: int) -> "FieldSpec":
        return cls("quadratic", d)

    def to_json(self) -> dict:
        return {"kind": self.kind} if self.d is None else {"kind": self.kind, "d": self.d}

    @classmethod
    def from_json(cls, obj: dict) -> "FieldSpec":
        return cls(obj["kind"], obj.get("d"))


class Scalar:
    """Immutable element a + b*sqrt(d); d is None for plain rationals."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b=0, d: int | None = None):
        a = Fraction(a)
        b = Fraction(b)
        if b == 0:
            d = None
        elif d is None:
            raise ValueError("irrational part requires a radicand")
        elif d < 2 or not is_square_free(d):
            raise ValueError("radicand must be square-free and >= 2")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("Scalar is immutable")

    # -- field bookkeeping -------------------------------------------------

    def _join(self, other: "Scalar") -> int | None:
        if self.d is None:
            return other.d
        if other.d is None or other.d == self.d:
            return self.d
        raise FieldMismatchError(f"sqrt({self.d}) vs sqrt({other.d})")

    @property
    def is_rational(self) -> bool:
        return self.d is None

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        if isinstance(value, (int, Fraction)):
            return Scalar(value)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        d = self._join(other)
        return Scalar(self.a + other.a, self.b + other.b, d)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.a, -self.b, self.d)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        d = self._join(other)
        rad = d if d is not None else 0
        return Scalar(
            self.a * other.a + self.b * other.b * rad,
            self.a * other.b + self.b * other.a,
            d,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if not self:
            raise ZeroDivisionError("scalar division by zero")
        if self.d is None:
            return Scalar(1 / self.a)
        norm = self.a * self.a - self.b * self.b * self.d
        # norm == 0 would force sqrt(d) rational, impossible for square-free d
        return Scalar(self.a / norm, -self.b / norm, self.d)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inverse()

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- order -------------------------------------------------------------

    def sign(self) -> int:
        """Exact sign via the rational conjugate-norm test; never floats."""
        if self.b == 0:
            return (self.a > 0) - (self.a < 0)
        if self.a == 0:
            return 1 if self.b > 0 else -1
        sa = 1 if self.a > 0 else -1
        sb = 1 if self.b > 0 else -1
        if sa == sb:
            return sa
        lhs = self.a * self.a
        rhs = self.b * self.b * self.d
        if lhs == rhs:
            raise ArithmeticError("sqrt(%d) cannot be rational" % self.d)
        return sa if lhs > rhs else sb

    def __bool__(self):
        return not (self.a == 0 and self.b == 0)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.a == other.a and self.b == other.b and (self.b == 0 or self.d == other.d)

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign() < 0

    def __le__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign() <= 0

    def __gt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign() > 0

    def __ge__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign() >= 0

    # -- conversions ---------------------------------------------------------

    def __float__(self):
        if self.b == 0:
            return float(self.a)
        return float(self.a) + float(self.b) * self.d ** 0.5

    def serialize(self) -> str:
        head = f"{self.a.numerator}/{self.a.denominator}"
        if self.b == 0:
            return head
        op = "+" if self.b > 0 else "-"
        c = abs(self.b)
        return f"{head} {op} {c.numerator}/{c.denominator}*sqrt({self.d})"

    def __repr__(self):
        return f"Scalar({self.serialize()!r})"

    def sort_key(self):
        """Total-order key usable next to other scalars of the same field."""
        return self


ZERO = Scalar(0)
ONE = Scalar(1)


def scalar(value, d: int | None = None) -> Scalar:
    """Build a Scalar from an int, Fraction, Scalar or text form."""
    if isinstance(value, Scalar):
        return value
    if isinstance(value, str):
        return parse_scalar(value, FieldSpec.quadratic(d) if d else None)
    return Scalar(value)


def sqrt_of(d: int) -> Scalar:
    return Scalar(0, 1, d)


def compare(a: Scalar, b: Scalar) -> Ordering:
    """Exact comparison in the common field; EQ iff exactly equal."""
    s = (scalar(a) - scalar(b)).sign()
    return Ordering(s)


def arith(op: str, a: Scalar, b: Scalar) -> Scalar:
    a, b = scalar(a), scalar(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


_RAT = r"[+-]?\d+(?:/\d+)?"
_SCALAR_RE = re.compile(
    rf"^(?P<rat>{_RAT})?(?:(?P<op>[+-])?(?P<co>\d+(?:/\d+)?)\*sqrt\((?P<rad>\d+)\))?$"
)


def parse_scalar(text: str, field: FieldSpec | None = None) -> Scalar:
    """Parse 'a/b' or 'a/b + c/e*sqrt(d)'; integers allowed without '/'."""
    compact = text.replace(" ", "")
    m = _SCALAR_RE.match(compact)
    if not m or (m.group("rat") is None and m.group("co") is None):
        raise ValueError(f"cannot parse scalar {text!r}")
    a = Fraction(m.group("rat")) if m.group("rat") is not None else Fraction(0)
    b = Fraction(0)
    d = None
    if m.group("co") is not None:
        if m.group("rat") is not None and m.group("op") is None:
            raise ValueError(f"missing sign before radical term in {text!r}")
        b = Fraction(m.group("co"))
        if m.group("op") == "-":
            b = -b
        d = int(m.group("rad"))
    if field is not None:
        if field.kind == "rational" and d is not None:
            raise FieldMismatchError(f"radical term not allowed in rational field: {text!r}")
        if field.kind == "quadratic" and d is not None and d != field.d:
            raise FieldMismatchError(f"sqrt({d}) does not live in Q(sqrt({field.d}))")
    return Scalar(a, b, d)
