"""Exact arithmetic: rationals, the field Q(sqrt 2), and signs of p + q*sqrt(r).

Every comparison that decides a construction step goes through this module.
Floats appear only as initial guesses for bracketing, never as deciders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Union

from .errors import NegativeRadicand

Rational = Fraction
Number = Union[int, Fraction, "QuadReal"]


def sign(x) -> int:
    return (x > 0) - (x < 0)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def parse_fraction(s: str) -> Fraction:
    """Parse "num/den" or a plain integer string. Floats are rejected."""
    s = s.strip()
    if "." in s or "e" in s.lower():
        raise ValueError(f"not an exact rational: {s!r}")
    return Fraction(s)


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True, slots=True)
class QuadReal:
    """The number a + b*sqrt(2) with rational a, b.

    The pair (a, b) is unique for a given real because sqrt(2) is
    irrational, so equality and hashing are structural.
    """

    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))

    @staticmethod
    def lift(x: Number) -> "QuadReal":
        if isinstance(x, QuadReal):
            return x
        return QuadReal(as_fraction(x), Fraction(0))

    def __add__(self, other):
        o = QuadReal.lift(other)
        return QuadReal(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return QuadReal(-self.a, -self.b)

    def __sub__(self, other):
        o = QuadReal.lift(other)
        return QuadReal(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        return QuadReal.lift(other) - self

    def __mul__(self, other):
        o = QuadReal.lift(other)
        return QuadReal(self.a * o.a + 2 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadReal":
        return QuadReal(self.a, -self.b)

    def norm(self) -> Fraction:
        """Field norm a^2 - 2 b^2; zero only for the zero element."""
        return self.a * self.a - 2 * self.b * self.b

    def inverse(self) -> "QuadReal":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero in Q(sqrt 2)")
        return QuadReal(self.a / n, -self.b / n)

    def __truediv__(self, other):
        return self * QuadReal.lift(other).inverse()

    def __rtruediv__(self, other):
        return QuadReal.lift(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        out = QuadReal(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def sign(self) -> int:
        return quad_sign(self)

    def _cmp(self, other) -> int:
        return quad_sign(self - QuadReal.lift(other))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, QuadReal):
            return self.a == other.a and self.b == other.b
        return NotImplemented

    def __hash__(self):
        return hash((self.a, self.b))

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(2.0)

    def __repr__(self):
        return f"QuadReal({self.a} + {self.b}*sqrt2)"

    def is_rational(self) -> bool:
        return self.b == 0

    def to_json(self) -> dict:
        return {"a": fraction_str(self.a), "b": fraction_str(self.b)}

    @classmethod
    def from_json(cls, d: dict) -> "QuadReal":
        return cls(parse_fraction(d["a"]), parse_fraction(d["b"]))


SQRT2 = QuadReal(0, 1)
# gamma = 18 / (9 - sqrt 2), rationalised
GAMMA = QuadReal(Fraction(162, 79), Fraction(18, 79))
# (9 gamma)^{-1} = (9 - sqrt 2) / 162, the admissibility threshold for psi(1)
PSI_THRESHOLD = QuadReal(Fraction(9, 162), Fraction(-1, 162))


def quad_sign(x: QuadReal) -> int:
    """Exact sign of a + b*sqrt(2), by comparing a^2 against 2 b^2."""
    sa, sb = sign(x.a), sign(x.b)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    return sa if x.a * x.a > 2 * x.b * x.b else sb


@dataclass(frozen=True, slots=True)
class QuadRadical:
    """The real p + q*sqrt(r) with p, q, r in Q(sqrt 2) and r >= 0."""

    p: QuadReal
    q: QuadReal = QuadReal()
    r: QuadReal = QuadReal()

    def __post_init__(self):
        for name in ("p", "q", "r"):
            object.__setattr__(self, name, QuadReal.lift(getattr(self, name)))

    def shift(self, c: Number) -> "QuadRadical":
        return QuadRadical(self.p + c, self.q, self.r)

    def scale(self, c: Number) -> "QuadRadical":
        return QuadRadical(self.p * c, self.q * c, self.r)

    def __add__(self, other: "QuadRadical") -> "QuadRadical":
        if isinstance(other, QuadRadical):
            if other.q.sign() != 0 and self.q.sign() != 0 and other.r != self.r:
                raise ValueError("cannot add radicals with different radicands")
            r = self.r if self.q.sign() != 0 else other.r
            return QuadRadical(self.p + other.p, self.q + other.q, r)
        return self.shift(other)

    def __neg__(self):
        return QuadRadical(-self.p, -self.q, self.r)

    def __sub__(self, other):
        return self + (-other if isinstance(other, QuadRadical) else -QuadReal.lift(other))

    def __float__(self):
        return float(self.p) + float(self.q) * math.sqrt(max(float(self.r), 0.0))

    def sign(self) -> int:
        return radical_sign(self)


def radical_sign(x: QuadRadical) -> int:
    """Exact sign of p + q*sqrt(r).

    When p and q have opposite signs the answer is decided by p^2 versus
    q^2 r, itself an element of Q(sqrt 2) whose sign quad_sign decides.
    """
    sr = quad_sign(x.r)
    if sr < 0:
        raise NegativeRadicand(f"radicand {float(x.r):.6g} < 0")
    sp, sq = quad_sign(x.p), quad_sign(x.q)
    if sq == 0 or sr == 0:
        return sp
    if sp == 0 or sp == sq:
        return sq
    d = quad_sign(x.p * x.p - x.q * x.q * x.r)
    if d > 0:
        return sp
    if d < 0:
        return sq
    return 0


def _initial_guess(x: QuadRadical) -> int:
    try:
        f = float(x)
    except OverflowError:
        return 0
    if not math.isfinite(f):
        return 0
    return math.floor(f)


def radical_floor(x: QuadRadical) -> int:
    """Largest integer n with n <= x, certified by radical_sign."""

    def at_least(n: int) -> bool:
        return radical_sign(x.shift(-n)) >= 0

    if quad_sign(x.r) < 0:
        raise NegativeRadicand(f"radicand {float(x.r):.6g} < 0")
    lo = _initial_guess(x)
    step = 1
    while not at_least(lo):
        lo -= step
        step *= 2
    hi = lo + 1
    step = 1
    while at_least(hi):
        lo = hi
        hi += step
        step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if at_least(mid):
            lo = mid
        else:
            hi = mid
    return lo


def radical_ceil(x: QuadRadical) -> int:
    return -radical_floor(-x)


def nearest_integer(x: Fraction, tie_up: bool = False) -> int:
    """[x]; exact halves go to the even neighbour unless tie_up is set."""
    n = round(x)  # Fraction.__round__ is half-to-even
    if tie_up and x - math.floor(x) == Fraction(1, 2):
        return 2 * math.floor(x) + 1 - n
    return n


def dist_to_z(x: Fraction) -> Fraction:
    """||x||, the distance from x to the nearest integer."""
    f = x - math.floor(x)
    return min(f, 1 - f)


def is_integer(x: Fraction) -> bool:
    return x.denominator == 1


def sqrt_bounds(x: Fraction, bits: int = 128) -> tuple[Fraction, Fraction]:
    """Dyadic lo <= sqrt(x) <= hi with hi - lo <= 2^-bits (exact when possible)."""
    if x < 0:
        raise NegativeRadicand(str(x))
    scale = 1 << bits
    # floor(sqrt(x) * 2^bits) = isqrt(floor(x * 4^bits))
    n = (x.numerator << (2 * bits)) // x.denominator
    s = math.isqrt(n)
    lo = Fraction(s, scale)
    if lo * lo == x:
        return lo, lo
    return lo, Fraction(s + 1, scale)


def _decimal(x: Fraction, digits: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_HALF_EVEN
        return Decimal(x.numerator) / Decimal(x.denominator)


def _fmt(d: Decimal, digits: int) -> str:
    if d == 0:
        return "0"
    return f"{d:.{digits - 1}E}"


def to_decimal_str(x: Number, digits: int = 30) -> str:
    """Round-to-nearest decimal with `digits` significant digits.

    QuadReal values are enclosed with ever tighter rational bounds on
    sqrt(2) until both ends round to the same string.
    """
    if not isinstance(x, QuadReal):
        return _fmt(_decimal(as_fraction(x), digits), digits)
    if x.b == 0:
        return _fmt(_decimal(x.a, digits), digits)
    bits = 4 * digits + 64
    while True:
        lo2, hi2 = sqrt_bounds(Fraction(2), bits)
        ends = sorted((x.a + x.b * lo2, x.a + x.b * hi2))
        s_lo = _fmt(_decimal(ends[0], digits), digits)
        s_hi = _fmt(_decimal(ends[1], digits), digits)
        if s_lo == s_hi:
            return s_lo
        bits *= 2
