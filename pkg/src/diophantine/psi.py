"""Admissible approximation functions and their certified rational evaluation.

Three families ship, each positive and non-increasing on [1, inf):

    constant        psi(x) = c
    power-decay     psi(x) = c * x**(-exponent)            exponent >= 0
    log-reciprocal  psi(x) = c / (1 + ln(x) / shift)       shift > 0

so psi(1) = c in every family and admissibility is a single exact
comparison of c against (9 - sqrt 2)/162.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
from mpmath import iv, mp, mpf

from .errors import InadmissibleSpec
from .exact import PSI_THRESHOLD, QuadReal, fraction_str, parse_fraction, to_decimal_str

KINDS = ("constant", "power-decay", "log-reciprocal")
ENCLOSURE_BITS = 128
SNAP_BITS = 64
MAX_REL_WIDTH = Fraction(1, 2**32)


@dataclass(frozen=True)
class PsiSpec:
    kind: str
    c: Fraction
    exponent: Fraction | None = None
    shift: Fraction | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown psi kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.c <= 0:
            raise ValueError("psi must be positive: c > 0")
        if self.kind == "power-decay":
            if self.exponent is None or self.exponent < 0:
                raise ValueError("power-decay needs an exponent >= 0")
        elif self.exponent is not None:
            raise ValueError(f"{self.kind} takes no exponent")
        if self.kind == "log-reciprocal":
            if self.shift is None:
                object.__setattr__(self, "shift", Fraction(1))
            if self.shift <= 0:
                raise ValueError("log-reciprocal needs shift > 0")
        elif self.shift is not None:
            raise ValueError(f"{self.kind} takes no shift")

    def at_one(self) -> Fraction:
        return self.c

    def to_json(self) -> dict:
        d = {"kind": self.kind, "c": fraction_str(self.c)}
        if self.exponent is not None:
            d["exponent"] = fraction_str(self.exponent)
        if self.shift is not None:
            d["shift"] = fraction_str(self.shift)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PsiSpec":
        unknown = set(d) - {"kind", "c", "exponent", "shift"}
        if unknown:
            raise ValueError(f"unknown psi fields: {sorted(unknown)}")
        opt = lambda k: parse_fraction(d[k]) if d.get(k) is not None else None  # noqa: E731
        return cls(d["kind"], parse_fraction(d["c"]), opt("exponent"), opt("shift"))

    @classmethod
    def parse(cls, text: str) -> "PsiSpec":
        """Inline form "kind:c[:exponent|shift]" or a path to a JSON file."""
        p = Path(text)
        if text.endswith(".json") or p.is_file():
            return cls.from_json(json.loads(p.read_text()))
        kind, _, rest = text.partition(":")
        parts = rest.split(":") if rest else []
        if not parts:
            raise ValueError(f"missing c in psi spec {text!r}")
        c = parse_fraction(parts[0])
        extra = parse_fraction(parts[1]) if len(parts) > 1 else None
        if len(parts) > 2:
            raise ValueError(f"too many fields in psi spec {text!r}")
        if kind == "power-decay":
            return cls(kind, c, exponent=extra)
        if kind == "log-reciprocal":
            return cls(kind, c, shift=extra)
        if extra is not None:
            raise ValueError(f"{kind} takes a single parameter")
        return cls(kind, c)


@dataclass(frozen=True)
class PsiValue:
    """Snapped value psi_hat with a rational enclosure [lower, upper] of psi."""

    value: Fraction
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        if not (self.lower <= self.value <= self.upper):
            raise ValueError("PsiValue needs lower <= value <= upper")

    @classmethod
    def exact(cls, x: Fraction) -> "PsiValue":
        return cls(x, x, x)


def check_admissible(spec: PsiSpec) -> None:
    if QuadReal(spec.at_one()) > PSI_THRESHOLD:
        raise InadmissibleSpec(
            f"psi(1) = {fraction_str(spec.at_one())} exceeds (9γ)^-1 = (9-√2)/162 "
            f"≈ {to_decimal_str(PSI_THRESHOLD, 12)}"
        )


def _root_enclosure(n: int, p: int, q: int, bits: int) -> tuple[Fraction, Fraction]:
    """Enclosure of n**(p/q) for integers n >= 1, p >= 0, q >= 1."""
    big = gmpy2.mpz(n) ** p << (q * bits)
    r, exact = gmpy2.iroot(big, q)
    lo = Fraction(int(r), 1 << bits)
    return (lo, lo) if exact else (lo, Fraction(int(r) + 1, 1 << bits))


def _ln_enclosure(n: int, bits: int) -> tuple[Fraction, Fraction]:
    saved = iv.prec
    iv.prec = bits + 32
    try:
        x = iv.log(iv.mpf(n))
    finally:
        iv.prec = saved
    with mp.workprec(bits + 32):
        ends = []
        for e in (x.a, x.b):
            man, exp = mpf(e).man_exp
            ends.append(Fraction(int(man)) * (Fraction(2) ** int(exp)))
    return ends[0], ends[1]


def enclosure(spec: PsiSpec, sq_norm: int, bits: int = ENCLOSURE_BITS) -> tuple[Fraction, Fraction]:
    """Rational lo <= psi(sqrt(sq_norm)) <= hi."""
    if sq_norm < 1:
        raise ValueError("sq_norm must be >= 1")
    c = spec.c
    if spec.kind == "constant" or sq_norm == 1:
        return c, c
    if spec.kind == "power-decay":
        e = spec.exponent
        if e == 0:
            return c, c
        # psi = c / sqrt(N)^e = c / N^(p / 2q)
        y_lo, y_hi = _root_enclosure(sq_norm, e.numerator, 2 * e.denominator, bits)
        return c / y_hi, c / y_lo
    # log-reciprocal: ln(sqrt N) = ln(N)/2
    l_lo, l_hi = _ln_enclosure(sq_norm, bits)
    s2 = 2 * spec.shift
    return c / (1 + l_hi / s2), c / (1 + l_lo / s2)


def _floor_log2(x: Fraction) -> int:
    """floor(log2(x)) for x > 0."""
    e = x.numerator.bit_length() - x.denominator.bit_length()
    return e if Fraction(2) ** e <= x else e - 1


def psi_eval(spec: PsiSpec, sq_norm: int, prev: PsiValue | None = None) -> PsiValue:
    """psi at sqrt(sq_norm), snapped down to 64 significant bits and clamped below prev."""
    check_admissible(spec)
    lo, hi = enclosure(spec, sq_norm)
    if lo == hi:
        value = lo
    else:
        # keep SNAP_BITS significant bits, so tiny values stay relatively accurate
        shift = SNAP_BITS + max(0, -_floor_log2(lo))
        value = Fraction(math.floor(lo * (1 << shift)), 1 << shift)
        if value <= 0 or hi - value > MAX_REL_WIDTH * value:
            raise ValueError(f"psi({sq_norm}) enclosure too wide to certify")
    lower = min(lo, value)
    if prev is not None and value > prev.value:
        value = prev.value
        lower = min(lower, value)
    return PsiValue(value, lower, hi)


def psi_argument(mode: str, k: int, sq_norm: int) -> int:
    """Squared argument fed to psi: |m_k|^2 in norm mode, k^2 in index mode."""
    if mode == "norm":
        return sq_norm
    if mode == "index":
        return k * k
    raise ValueError(f"unknown mode {mode!r}")
