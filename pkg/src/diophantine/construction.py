"""The induction engine: base case, one verified induction step, and the driver.

A state k carries the pair (m_k, m_{k+1}), the rational anchor alpha_k and
the side delta_k of the half-ball Omega_k, whose radius is
R_k = (2 |m_{k+1}| |det(m_k, m_{k+1})|)^{-1}. Every step re-verifies the
arithmetic conditions it relies on and raises StepVerificationFailed
instead of trusting them.

The next vector m_{k+2} is taken from the affine lattice w + span(m_k, m_{k+1})
in the preference order of the two "minimal and non-negative" objectives
measured from the point v. When the radicand under v is negative (which
happens for psi near its admissible maximum) the m_{k+1}-component of v is
clamped to zero, and when the preferred point violates a required bound the
next admissible point is used; the driver backtracks over these ranks.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator

from .errors import (
    ConstructionFailed,
    InadmissiblePsi,
    PreconditionFailed,
    SignLawViolated,
    SingularSystem,
    StepVerificationFailed,
    TripleSwitchViolated,
)
from .exact import (
    GAMMA,
    PSI_THRESHOLD,
    QuadRadical,
    QuadReal,
    dist_to_z,
    fraction_str,
    nearest_integer,
    parse_fraction,
    radical_ceil,
    radical_floor,
    sqrt_bounds,
)
from .lattice import (
    IntVec2,
    RatVec2,
    cramer,
    det2,
    find_w,
    inner,
    perp,
    value_lattice_is_span,
)
from .psi import PsiSpec, PsiValue, check_admissible, psi_argument, psi_eval

log = logging.getLogger(__name__)

TRACE_VERSION = 1
R_BITS = 128
STATE_CHECKS = ("c1", "c2", "c3", "c4", "c5")
STEP_CHECKS = ("c6", "sign", "triple", "nest", "precursor")


@dataclass(frozen=True)
class Branch:
    """Bit tape consumed at tie points: base half-ball, orthogonal pairs, half-integer rounding."""

    bits: str = ""

    def __post_init__(self):
        if any(ch not in "01" for ch in self.bits):
            raise ValueError(f"branch seed must be a bitstring, got {self.bits!r}")

    def bit(self, pos: int) -> int:
        return int(self.bits[pos]) if pos < len(self.bits) else 0


@dataclass(frozen=True)
class HalfBall:
    """Closed disk around `center` cut by the line through it with normal `normal`.

    The kept half is {x : side * <x - center, normal> <= 0}.
    """

    center: RatVec2
    R_sq: Fraction
    R_lower: Fraction
    R_upper: Fraction
    normal: IntVec2
    side: int

    def contains(self, x: RatVec2) -> bool:
        d = x - self.center
        return self.side * inner(d, self.normal) <= 0 and d.sq_norm <= self.R_sq


@dataclass(frozen=True)
class StepState:
    k: int
    m_k: IntVec2
    m_k1: IntVec2
    alpha: RatVec2
    delta: int
    R_lower: Fraction
    R_upper: Fraction
    psi: PsiValue
    checks: dict = field(default_factory=dict, compare=False)
    branch_pos: int = 0
    ties: tuple = ()
    rank: int = 0
    lexmin_pick: bool = True  # m_{k+1} is the lexicographic minimiser measured from v

    @property
    def det(self) -> int:
        return abs(det2(self.m_k, self.m_k1))

    @property
    def R_sq(self) -> Fraction:
        return Fraction(1, 4 * self.m_k1.sq_norm * self.det**2)

    def half_ball(self) -> HalfBall:
        return HalfBall(self.alpha, self.R_sq, self.R_lower, self.R_upper, self.m_k, self.delta)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "m_k": self.m_k.to_json(),
            "m_k1": self.m_k1.to_json(),
            "alpha": self.alpha.to_json(),
            "delta": self.delta,
            "R_lower": fraction_str(self.R_lower),
            "R_upper": fraction_str(self.R_upper),
            "psi_hat": fraction_str(self.psi.value),
            "psi_lower": fraction_str(self.psi.lower),
            "psi_upper": fraction_str(self.psi.upper),
            "rank": self.rank,
            "lexmin_pick": self.lexmin_pick,
            "checks": dict(self.checks),
        }

    @classmethod
    def from_json(cls, d: dict) -> "StepState":
        psi = PsiValue(
            parse_fraction(d["psi_hat"]),
            parse_fraction(d.get("psi_lower", d["psi_hat"])),
            parse_fraction(d.get("psi_upper", d["psi_hat"])),
        )
        delta = d["delta"]
        if delta not in (1, -1) or isinstance(delta, bool):
            raise ValueError(f"delta must be +1 or -1, got {delta!r}")
        return cls(
            k=int(d["k"]),
            m_k=IntVec2.from_json(d["m_k"]),
            m_k1=IntVec2.from_json(d["m_k1"]),
            alpha=RatVec2.from_json(d["alpha"]),
            delta=delta,
            R_lower=parse_fraction(d["R_lower"]),
            R_upper=parse_fraction(d["R_upper"]),
            psi=psi,
            checks=dict(d.get("checks", {})),
            rank=int(d.get("rank", 0)),
            lexmin_pick=bool(d.get("lexmin_pick", True)),
        )


@dataclass
class ConstructionTrace:
    psi_spec: PsiSpec
    mode: str
    branch: str
    steps: list[StepState]
    branch_choices: list[dict] = field(default_factory=list)
    lookahead: int = 0  # search depth achieved beyond K; not serialised
    final_enclosure_stored: dict | None = None

    @property
    def K(self) -> int:
        return len(self.steps)

    @property
    def final_enclosure(self) -> dict:
        return enclosure_box(self.steps[-1])

    def prefix(self, n: int) -> "ConstructionTrace":
        """The trace of the first n states."""
        steps = self.steps[:n]
        return ConstructionTrace(self.psi_spec, self.mode, self.branch, steps, branch_choices(steps))

    def to_json(self) -> dict:
        box = self.final_enclosure
        return {
            "version": TRACE_VERSION,
            "psi_spec": self.psi_spec.to_json(),
            "mode": self.mode,
            "branch": self.branch,
            "branch_choices": self.branch_choices,
            "steps": [s.to_json() for s in self.steps],
            "final_enclosure": {
                "x": [fraction_str(v) for v in box["x"]],
                "y": [fraction_str(v) for v in box["y"]],
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "ConstructionTrace":
        if d.get("version") != TRACE_VERSION:
            raise ValueError(f"unsupported trace version {d.get('version')!r}")
        if d["mode"] not in ("norm", "index"):
            raise ValueError(f"unknown mode {d['mode']!r}")
        return cls(
            psi_spec=PsiSpec.from_json(d["psi_spec"]),
            mode=d["mode"],
            branch=Branch(d.get("branch", "")).bits,
            steps=[StepState.from_json(s) for s in d["steps"]],
            branch_choices=list(d.get("branch_choices", [])),
            final_enclosure_stored={
                axis: tuple(parse_fraction(v) for v in d["final_enclosure"][axis]) for axis in ("x", "y")
            },
        )

    @classmethod
    def loads(cls, text: str) -> "ConstructionTrace":
        return cls.from_json(json.loads(text))


def enclosure_box(state: StepState) -> dict:
    """Axis box around alpha_k of half-width R_k (upper bound); contains Omega_k."""
    a, r = state.alpha, state.R_upper
    return {"x": (a.x1 - r, a.x1 + r), "y": (a.x2 - r, a.x2 + r)}


def radius_enclosure(m_k1: IntVec2, det: int, bits: int = R_BITS) -> tuple[Fraction, Fraction]:
    """Dyadic bounds on R = (2 |m_k1| det)^{-1} at `bits` fractional bits."""
    s_lo, s_hi = sqrt_bounds(Fraction(m_k1.sq_norm), bits)
    lo, hi = 1 / (2 * s_hi * det), 1 / (2 * s_lo * det)
    scale = 1 << bits
    return Fraction(math.floor(lo * scale), scale), Fraction(math.ceil(hi * scale), scale)


def _ratio_bounds_ok(ratio: Fraction, psi: Fraction) -> bool:
    """(2 gamma psi)^{-1} <= ratio < (gamma psi)^{-1}."""
    low = (2 * GAMMA * psi).inverse()
    return low <= QuadReal(ratio) and QuadReal(ratio) < 2 * low


def state_checks(state: StepState) -> dict:
    """Hypotheses 1, 2, 4, 5 of the induction step, plus an arithmetic certificate for 3.

    Hypothesis 3 holds on the whole disk once the value lattice of alpha_k is
    span(m_k, m_{k+1}) and |m_k| < |m_{k+1}|: values off the span stay at
    distance > 1/(2 det) from Z, while |<alpha, m_k>| stays below it.
    """
    n0, n1, d = state.m_k.sq_norm, state.m_k1.sq_norm, state.det
    ratio = QuadReal(Fraction(d, n0)) if n0 else QuadReal(0)
    c2 = value_lattice_is_span(state.alpha, state.m_k, state.m_k1)
    return {
        "c1": inner(state.m_k, state.m_k1) <= 0,
        "c2": c2,
        "c3": c2 and 0 < n0 < n1,
        "c4": d != 0 and GAMMA < ratio and ratio < 3 * GAMMA,
        "c5": n0 > 0 and _ratio_bounds_ok(Fraction(n1, n0), state.psi.value),
        "R": d != 0 and state.R_lower**2 <= state.R_sq <= state.R_upper**2,
    }


def verify_state(state: StepState) -> None:
    checks = state_checks(state)
    for key in ("c1", "c2", "c4", "c5", "c3", "R"):
        if not checks[key]:
            raise StepVerificationFailed(key, state.k, f"m_k={state.m_k}, m_k1={state.m_k1}")


def half_ball_side(delta_k: int, m_k: IntVec2, m_k1: IntVec2, bit: int = 0) -> int:
    """delta_{k+1}: pick the half of the next disk nearer to the line l_k.

    The half displaced along -delta_{k+1} m_{k+1} moves towards l_k iff
    delta_{k+1} delta_k <m_k, m_{k+1}> < 0. An orthogonal pair is a tie and
    is settled by the branch bit.
    """
    s = inner(m_k, m_k1)
    if s > 0:
        raise PreconditionFailed("condition 1 violated: <m_k, m_k1> > 0")
    if s < 0:
        return delta_k
    return 1 if bit == 0 else -1


def base_case(psi1: PsiValue, branch: Branch = Branch()) -> StepState:
    """m_1 = (1, 0), m_2 = (-ceil(sqrt((2 gamma psi_1)^{-1} - gamma^2)), 3), alpha_1 = (0, 1/3)."""
    radicand = (2 * GAMMA * psi1.value).inverse() - GAMMA * GAMMA
    if radicand.sign() < 0:
        raise InadmissiblePsi(
            f"psi_1 = {fraction_str(psi1.value)} exceeds 1/(2γ^3) ≈ 0.03742: "
            "the base-case radicand (2γψ_1)^-1 - γ^2 is negative"
        )
    c = radical_ceil(QuadRadical(0, 1, radicand))
    m1, m2 = IntVec2(1, 0), IntVec2(-c, 3)
    bit = branch.bit(0)
    delta = 1 if bit == 0 else -1
    r_lo, r_hi = radius_enclosure(m2, abs(det2(m1, m2)))
    state = StepState(
        k=1, m_k=m1, m_k1=m2, alpha=RatVec2(Fraction(0), Fraction(1, 3)), delta=delta,
        R_lower=r_lo, R_upper=r_hi, psi=psi1, branch_pos=1, ties=(("base-side", 1, bit),),
    )
    checks = state_checks(state)
    if not checks["c5"]:
        raise InadmissiblePsi(f"base case fails condition 5 for psi_1 = {fraction_str(psi1.value)}")
    checks.update({key: True for key in STEP_CHECKS})
    state = replace(state, checks=checks)
    verify_state(state)
    return state


@dataclass(frozen=True)
class StepGeometry:
    """Auxiliary data of one step: w, m_perp and the point v (as radicals)."""

    w: IntVec2
    m_perp: IntVec2
    A: Fraction
    B: QuadReal
    radicand: QuadReal
    clamped: bool
    v: tuple[QuadRadical, QuadRadical]


def point_v(state: StepState, psi_next: PsiValue) -> StepGeometry:
    """v = A delta m_perp - sqrt(B - A^2) m_{k+1}, with A = psi_k^{-1} |m_k|^2/|m_{k+1}|^2 and
    B = (2 gamma psi_{k+1})^{-1}; a negative radicand is clamped to 0."""
    m_k, m_k1 = state.m_k, state.m_k1
    w = find_w(m_k, m_k1, state.alpha)
    mp = perp(m_k1, m_k)
    A = Fraction(m_k.sq_norm, m_k1.sq_norm) / state.psi.value
    B = (2 * GAMMA * psi_next.value).inverse()
    rad = B - A * A
    clamped = rad.sign() < 0
    r = QuadReal(0) if clamped else rad
    v = tuple(
        QuadRadical(A * state.delta * p, -c, r) for p, c in ((mp.x1, m_k1.x1), (mp.x2, m_k1.x2))
    )
    return StepGeometry(w, mp, A, B, rad, clamped, v)


def _dot_radical(v: tuple[QuadRadical, QuadRadical], u: IntVec2) -> QuadRadical:
    return v[0].scale(u.x1) + v[1].scale(u.x2)


def select_m_next(
    w: IntVec2, m_k: IntVec2, m_k1: IntVec2, v: tuple[QuadRadical, QuadRadical], delta: int
) -> tuple[IntVec2, Fraction, Fraction]:
    """The point x of w + span(m_k, m_k1) minimising first <x - v, delta m_perp> >= 0,
    then <x - v, -m_k1> >= 0. Returns x and its coordinates (lambda1, lambda2)."""
    mp = perp(m_k1, m_k)
    d = inner(m_k, mp)  # = |det(m_k, m_k1)| > 0
    n1 = m_k1.sq_norm
    # <w + a m_k, m_perp> = <w, m_perp> + a d
    gap = (_dot_radical(v, mp) - QuadReal(inner(w, mp))).scale(Fraction(1, d))
    a = radical_ceil(gap) if delta > 0 else radical_floor(gap)
    y = w + a * m_k
    gap2 = (_dot_radical(v, m_k1) - QuadReal(inner(y, m_k1))).scale(Fraction(1, n1))
    b = radical_floor(gap2)
    x = y + b * m_k1
    lam1, lam2 = cramer(x, m_k, m_k1)
    if (lam1 > 0) - (lam1 < 0) != delta:
        raise SignLawViolated(f"lambda1 = {lam1} has the wrong sign for delta = {delta}")
    return x, lam1, lam2


@dataclass(frozen=True)
class Candidate:
    x: IntVec2
    t: int  # <x, delta m_perp>  = |det(m_{k+1}, x)|
    u: int  # <x, m_{k+1}>
    key: tuple


def iter_candidates(state: StepState, psi_next: PsiValue, geo: StepGeometry) -> Iterator[Candidate]:
    """All x in w + span(m_k, m_{k+1}) meeting conditions c1, c5 and c6, lazily in preference order.

    With t = <x, delta m_perp> and u = <x, m_{k+1}>:
      c6:  n_k/psi_k <= t < n_k/psi_k + 3 gamma n_k
      c1:  u <= 0
      c5:  B n1^2 <= t^2 + u^2 < 2 B n1^2        (|x|^2 = (t^2 + u^2)/n1)
    Order: t ascending, then the second objective -u - sqrt(r) n1 (non-negative
    values first, ascending; then negative values by magnitude).
    For fixed t, u = u0 + b n1 and each constraint is a bound on b of the form
    floor(p + q sqrt(s)), so the admissible b form one interval split in two.
    """
    m_k, m_k1, delta = state.m_k, state.m_k1, state.delta
    n0, n1 = m_k.sq_norm, m_k1.sq_norm
    d = state.det
    mp = geo.m_perp
    t0 = delta * inner(geo.w, mp)
    t_lo = Fraction(n0) / state.psi.value
    t_hi = t_lo + 3 * GAMMA * n0
    B1 = geo.B * (n1 * n1)
    r = geo.v[0].r
    inv = Fraction(-1, n1)
    t = t0 + d * math.ceil((t_lo - t0) / d)
    while QuadReal(t) < t_hi:
        a = delta * (t - t0) // d
        y = geo.w + a * m_k
        u0 = inner(y, m_k1)
        c = Fraction(-u0, n1)  # u = n1 (b - c)
        lo_sq, hi_sq = B1 - t * t, 2 * B1 - t * t
        if hi_sq.sign() > 0:
            # |u| < sqrt(hi_sq), u <= 0, |u| >= sqrt(lo_sq)
            b_min = radical_floor(QuadRadical(c, inv, hi_sq)) + 1
            b_top = math.floor(c)
            if lo_sq.sign() > 0:
                b_top = min(b_top, radical_floor(QuadRadical(c, inv, lo_sq)))
            # -u - sqrt(r) n1 >= 0  <=>  b <= c - sqrt(r)
            b_star = radical_floor(QuadRadical(c, -1, r))
            for b in range(min(b_top, b_star), b_min - 1, -1):
                u = u0 + b * n1
                yield Candidate(y + b * m_k1, t, u, (t, 0, -u))
            for b in range(max(b_star + 1, b_min), b_top + 1):
                u = u0 + b * n1
                yield Candidate(y + b * m_k1, t, u, (t, 1, u))
        t += d


def admissible_candidates(state: StepState, psi_next: PsiValue, geo: StepGeometry) -> list[Candidate]:
    return list(iter_candidates(state, psi_next, geo))


def solve_alpha_next(
    alpha_k: RatVec2, m_k1: IntVec2, m_k2: IntVec2, m_k: IntVec2 | None = None, tie_bit: int = 0
) -> RatVec2:
    """alpha_{k+1} from <alpha, m_k1> = <alpha_k, m_k1> and <alpha, m_k2> = [<alpha_k, m_k2>].

    Checks the basis-change conclusions: the value lattice of the result is
    span(m_k1, m_k2) and, when m_k is given, ||<alpha_{k+1}, m_k>|| = 1/|det(m_k1, m_k2)|.
    """
    d = det2(m_k1, m_k2)
    if d == 0:
        raise SingularSystem(f"{m_k1} and {m_k2} are collinear")
    r1 = inner(alpha_k, m_k1)
    r2 = Fraction(nearest_integer(inner(alpha_k, m_k2), tie_up=bool(tie_bit)))
    beta = RatVec2((r1 * m_k2.x2 - r2 * m_k1.x2) / d, (m_k1.x1 * r2 - m_k2.x1 * r1) / d)
    if not value_lattice_is_span(beta, m_k1, m_k2):
        raise TripleSwitchViolated(f"value lattice of {beta} is not span({m_k1}, {m_k2})")
    if m_k is not None and dist_to_z(inner(beta, m_k)) * abs(d) != 1:
        raise TripleSwitchViolated(
            f"||<alpha_next, m_k>|| = {dist_to_z(inner(beta, m_k))}, expected 1/{abs(d)}"
        )
    return beta


def _sum_of_roots_less(a: Fraction, b: Fraction, c: Fraction) -> bool:
    """sqrt(a) + sqrt(b) < sqrt(c) for non-negative rationals, decided exactly."""
    gap = c - a - b
    return gap > 0 and 4 * a * b < gap * gap


def step_checks(prev: StepState, new: StepState, lam1: Fraction) -> dict:
    """Conditions linking state k to state k+1 (c6, nesting, basis change)."""
    n0 = prev.m_k.sq_norm
    psi_k = prev.psi.value
    d1 = new.det
    ratio6 = QuadReal(Fraction(d1, n0))
    lo6 = QuadReal(1 / psi_k)
    dalpha = new.alpha - prev.alpha
    a = dalpha.sq_norm
    side = prev.delta * inner(dalpha, prev.m_k)
    # dist(alpha_{k+1}, l_k)^2 = side^2 / n0 must not be less than R_{k+1}^2
    nest = (
        _sum_of_roots_less(a, new.R_sq, prev.R_sq)
        and side < 0
        and side * side >= new.R_sq * n0
        and a == Fraction(prev.m_k1.sq_norm, (prev.det * d1) ** 2)
    )
    # R_{k+1} |m_k|^3 <= gamma psi_k^2, squared
    precursor = QuadReal(new.R_sq * n0**3) <= GAMMA * GAMMA * psi_k**4
    return {
        "c6": lo6 <= ratio6 and ratio6 < lo6 + 3 * GAMMA,
        "sign": (lam1 > 0) - (lam1 < 0) == prev.delta,
        "triple": dist_to_z(inner(new.alpha, prev.m_k)) * d1 == 1
        and inner(new.alpha, prev.m_k1) == inner(prev.alpha, prev.m_k1),
        "nest": nest,
        "precursor": precursor,
    }


def _successor(
    state: StepState, psi_next: PsiValue, branch: Branch, cand: Candidate, rank: int, lexmin_x: IntVec2 | None
) -> StepState:
    k = state.k
    x = cand.x
    lam1, _ = cramer(x, state.m_k, state.m_k1)
    if (lam1 > 0) - (lam1 < 0) != state.delta:
        raise SignLawViolated(f"k={k}: lambda1 = {lam1}, delta = {state.delta}")
    pos = state.branch_pos
    ties = []
    val = inner(state.alpha, x)
    tie_bit = 0
    if val - math.floor(val) == Fraction(1, 2):
        tie_bit = branch.bit(pos)
        ties.append(("nearest-int", k + 1, tie_bit))
        pos += 1
    alpha = solve_alpha_next(state.alpha, state.m_k1, x, m_k=state.m_k, tie_bit=tie_bit)
    side_bit = 0
    if inner(state.m_k, state.m_k1) == 0:
        side_bit = branch.bit(pos)
        ties.append(("half-ball", k + 1, side_bit))
        pos += 1
    delta = half_ball_side(state.delta, state.m_k, state.m_k1, side_bit)
    det = abs(det2(state.m_k1, x))
    r_lo, r_hi = radius_enclosure(x, det)
    new = StepState(
        k=k + 1, m_k=state.m_k1, m_k1=x, alpha=alpha, delta=delta, R_lower=r_lo, R_upper=r_hi,
        psi=psi_next, branch_pos=pos, ties=tuple(ties), rank=rank, lexmin_pick=(x == lexmin_x),
    )
    checks = state_checks(new)
    checks.update(step_checks(state, new, lam1))
    for key in ("c1", "c2", "c3", "c4", "c5", "R") + STEP_CHECKS:
        if not checks[key]:
            raise StepVerificationFailed(key, k + 1, f"m_k1={x}")
    return replace(new, checks=checks)


def _prepare(state: StepState, psi_next: PsiValue):
    if psi_next.value > state.psi.value or QuadReal(psi_next.value) > PSI_THRESHOLD:
        raise PreconditionFailed(
            f"psi_next = {fraction_str(psi_next.value)} must not exceed psi_k = "
            f"{fraction_str(state.psi.value)} or (9γ)^-1"
        )
    verify_state(state)
    geo = point_v(state, psi_next)
    try:
        lexmin_x, _, _ = select_m_next(geo.w, state.m_k, state.m_k1, geo.v, state.delta)
    except SignLawViolated:
        lexmin_x = None
    return geo, iter_candidates(state, psi_next, geo), lexmin_x


def induction_step(state: StepState, psi_next: PsiValue, branch: Branch = Branch(), rank: int = 0) -> StepState:
    """Apply one induction step using the admissible candidate of the given rank (0 = preferred)."""
    _, cands, lexmin_x = _prepare(state, psi_next)
    cand = next(itertools.islice(cands, rank, None), None)
    if cand is None:
        raise ConstructionFailed(state.k, f"fewer than {rank + 1} admissible candidates")
    return _successor(state, psi_next, branch, cand, rank, lexmin_x)


def successors(state: StepState, psi_next: PsiValue, branch: Branch = Branch()) -> Iterator[StepState]:
    """Verified successor states in preference order; candidates failing a check are skipped."""
    _, cands, lexmin_x = _prepare(state, psi_next)
    for rank, cand in enumerate(cands):
        try:
            yield _successor(state, psi_next, branch, cand, rank, lexmin_x)
        except (StepVerificationFailed, SignLawViolated, TripleSwitchViolated) as exc:
            log.debug("k=%d rank %d rejected: %s", state.k, rank, exc)


def next_psi(spec: PsiSpec, mode: str, state: StepState) -> PsiValue:
    arg = psi_argument(mode, state.k + 1, state.m_k1.sq_norm)
    return psi_eval(spec, arg, prev=state.psi)


def branch_choices(path: list[StepState]) -> list[dict]:
    return [{"k": k, "kind": kind, "bit": bit} for s in path for kind, k, bit in s.ties]


def run_construction(
    spec: PsiSpec,
    K: int,
    mode: str = "norm",
    branch: str = "",
    lookahead: int = 2,
    max_nodes: int = 20000,
) -> ConstructionTrace:
    """Depth-first search for K verified states that extend `lookahead` further steps.

    If no path reaches K + lookahead within max_nodes, the first path found
    reaching K is returned (lookahead is then reported as achieved depth - K).
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if mode not in ("norm", "index"):
        raise ValueError(f"unknown mode {mode!r}")
    check_admissible(spec)
    tape = Branch(branch)
    psi1 = psi_eval(spec, psi_argument(mode, 1, 1))
    base = base_case(psi1, tape)
    target = K + lookahead
    path = [base]
    stack = [successors(base, next_psi(spec, mode, base), tape)]
    best: list[StepState] | None = None
    nodes = 0
    while len(path) < target:
        if len(path) >= K and (best is None or len(path) > len(best)):
            best = list(path)
        nxt = next(stack[-1], None)
        nodes += 1
        if nxt is None:
            path.pop()
            stack.pop()
            if not path:
                break
            continue
        if nodes > max_nodes:
            break
        path.append(nxt)
        if len(path) < target:
            stack.append(successors(nxt, next_psi(spec, mode, nxt), tape))
    if len(path) >= target:
        best = path
    if best is None:
        raise ConstructionFailed(len(path) or 1, "search exhausted without reaching K states")
    steps = best[:K]
    return ConstructionTrace(
        psi_spec=spec, mode=mode, branch=tape.bits, steps=steps,
        branch_choices=branch_choices(steps), lookahead=len(best) - K,
    )
