"""Integer and rational vectors in the plane, and the lattice facts the construction uses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DegenerateDirection, NotFound, SingularBasis
from .exact import as_fraction, fraction_str, parse_fraction


@dataclass(frozen=True, slots=True)
class IntVec2:
    x1: int
    x2: int

    def __add__(self, o: "IntVec2") -> "IntVec2":
        return IntVec2(self.x1 + o.x1, self.x2 + o.x2)

    def __sub__(self, o: "IntVec2") -> "IntVec2":
        return IntVec2(self.x1 - o.x1, self.x2 - o.x2)

    def __neg__(self) -> "IntVec2":
        return IntVec2(-self.x1, -self.x2)

    def __mul__(self, c: int) -> "IntVec2":
        return IntVec2(c * self.x1, c * self.x2)

    __rmul__ = __mul__

    @property
    def sq_norm(self) -> int:
        return self.x1 * self.x1 + self.x2 * self.x2

    @property
    def sup_norm(self) -> int:
        return max(abs(self.x1), abs(self.x2))

    def is_zero(self) -> bool:
        return self.x1 == 0 and self.x2 == 0

    def canonical(self) -> "IntVec2":
        """Representative of {m, -m} whose first nonzero coordinate is positive."""
        if self.x1 < 0 or (self.x1 == 0 and self.x2 < 0):
            return -self
        return self

    def to_json(self) -> list[str]:
        return [str(self.x1), str(self.x2)]

    @classmethod
    def from_json(cls, v) -> "IntVec2":
        x1, x2 = v
        return cls(int(x1), int(x2))

    def __iter__(self):
        yield self.x1
        yield self.x2

    def __repr__(self):
        return f"({self.x1}, {self.x2})"


@dataclass(frozen=True, slots=True)
class RatVec2:
    x1: Fraction
    x2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x1", as_fraction(self.x1))
        object.__setattr__(self, "x2", as_fraction(self.x2))

    def __add__(self, o) -> "RatVec2":
        return RatVec2(self.x1 + o.x1, self.x2 + o.x2)

    def __sub__(self, o) -> "RatVec2":
        return RatVec2(self.x1 - o.x1, self.x2 - o.x2)

    def __mul__(self, c) -> "RatVec2":
        return RatVec2(c * self.x1, c * self.x2)

    __rmul__ = __mul__

    @property
    def sq_norm(self) -> Fraction:
        return self.x1 * self.x1 + self.x2 * self.x2

    def to_json(self) -> list[str]:
        return [fraction_str(self.x1), fraction_str(self.x2)]

    @classmethod
    def from_json(cls, v) -> "RatVec2":
        x1, x2 = v
        return cls(parse_fraction(x1), parse_fraction(x2))

    def __repr__(self):
        return f"({self.x1}, {self.x2})"


def det2(u, v):
    return u.x1 * v.x2 - u.x2 * v.x1


def inner(u, v):
    return u.x1 * v.x1 + u.x2 * v.x2


def perp(m: IntVec2, toward: IntVec2) -> IntVec2:
    """Rotation of m by a quarter turn, on the side where <., toward> > 0."""
    if m.is_zero():
        raise DegenerateDirection("cannot rotate the zero vector")
    p = IntVec2(-m.x2, m.x1)
    s = inner(p, toward)
    if s == 0:
        raise DegenerateDirection(f"{toward} is parallel to {m}")
    return p if s > 0 else -p


def cramer(x, b: IntVec2, c: IntVec2) -> tuple[Fraction, Fraction]:
    """Coordinates (s, t) with x = s*b + t*c."""
    d = det2(b, c)
    if d == 0:
        raise SingularBasis(f"{b} and {c} are collinear")
    return Fraction(det2(x, c), d), Fraction(det2(b, x), d)


def in_span(x: IntVec2, b: IntVec2, c: IntVec2) -> bool:
    s, t = cramer(x, b, c)
    return s.denominator == 1 and t.denominator == 1


def parallelogram_points(u: IntVec2, v: IntVec2) -> list[IntVec2]:
    """Integer points of {s*u + t*v : 0 <= s, t < 1}, by bounding-box scan.

    Only usable for small |det(u, v)|; the construction itself uses find_w.
    """
    d = det2(u, v)
    if d == 0:
        raise SingularBasis(f"{u} and {v} are collinear")
    xs = (0, u.x1, v.x1, u.x1 + v.x1)
    ys = (0, u.x2, v.x2, u.x2 + v.x2)
    out = []
    for x1 in range(min(xs), max(xs) + 1):
        for x2 in range(min(ys), max(ys) + 1):
            p = IntVec2(x1, x2)
            s, t = cramer(p, u, v)
            if 0 <= s < 1 and 0 <= t < 1:
                out.append(p)
    return out


def reduce_to_parallelogram(x: IntVec2, u: IntVec2, v: IntVec2) -> IntVec2:
    s, t = cramer(x, u, v)
    return x - math.floor(s) * u - math.floor(t) * v


def value_lattice_index(alpha: RatVec2) -> int:
    """Index in Z^2 of {x : <alpha, x> in Z}, i.e. lcm of the denominators."""
    return math.lcm(alpha.x1.denominator, alpha.x2.denominator)


def value_lattice_is_span(alpha: RatVec2, b: IntVec2, c: IntVec2) -> bool:
    """{x in Z^2 : <alpha, x> in Z} == span_Z(b, c).

    span(b, c) lies inside the value lattice iff both values are integers;
    the two lattices then coincide iff their indices |det(b, c)| and
    lcm(denominators) agree.
    """
    d = det2(b, c)
    if d == 0:
        return False
    if inner(alpha, b).denominator != 1 or inner(alpha, c).denominator != 1:
        return False
    return abs(d) == value_lattice_index(alpha)


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _frac_part(x: Fraction) -> Fraction:
    return x - math.floor(x)


def find_w(m_k: IntVec2, m_k1: IntVec2, alpha: RatVec2) -> IntVec2:
    """The point of the fundamental parallelogram of (m_k, m_k1) with {<alpha, w>} = 1/|det|.

    The value map x -> <alpha, x> mod 1 sends Z^2 onto (1/Q)Z/Z with
    Q = lcm of denominators, so a preimage of 1/Q comes from an extended
    gcd; it is then reduced into the half-open parallelogram.
    """
    d = abs(det2(m_k, m_k1))
    if d == 0:
        raise SingularBasis(f"{m_k} and {m_k1} are collinear")
    if inner(alpha, m_k).denominator != 1 or inner(alpha, m_k1).denominator != 1:
        raise NotFound("alpha is not integral on the basis vectors")
    q = value_lattice_index(alpha)
    if q != d or d == 1:
        raise NotFound(f"no point with fractional part 1/{d} (value lattice index {q})")
    p1 = int(alpha.x1 * q)
    p2 = int(alpha.x2 * q)
    g, u, v = _ext_gcd(p1, p2)
    t = pow(g, -1, q)
    w = reduce_to_parallelogram(IntVec2(t * u, t * v), m_k, m_k1)
    if _frac_part(inner(alpha, w)) != Fraction(1, d):
        raise NotFound(f"reduced point {w} misses 1/{d}")
    return w


def find_w_by_enumeration(m_k: IntVec2, m_k1: IntVec2, alpha: RatVec2) -> IntVec2:
    d = abs(det2(m_k, m_k1))
    hits = [p for p in parallelogram_points(m_k, m_k1) if _frac_part(inner(alpha, p)) == Fraction(1, d)]
    if len(hits) != 1:
        raise NotFound(f"{len(hits)} parallelogram points with fractional part 1/{d}")
    return hits[0]
