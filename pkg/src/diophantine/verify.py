"""Brute-force best approximations and the trace auditor.

The oracle works with exact integers throughout: alpha is written as
(p1, p2)/Q, so that ||<alpha, m>|| = e(m)/Q with e(m) = min(r, Q - r) and
r = (p1 x + p2 y) mod Q. Points are enumerated in annuli of doubling squared
norm; with screening on, an annulus keeps only points whose error beats the
best error over all earlier annuli, which no best approximation can fail to do.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .construction import (
    STATE_CHECKS,
    STEP_CHECKS,
    Branch,
    ConstructionTrace,
    StepState,
    _prepare,
    base_case,
    enclosure_box,
    half_ball_side,
    radius_enclosure,
    solve_alpha_next,
    state_checks,
    step_checks,
)
from .exact import GAMMA, QuadReal, dist_to_z, fraction_str, to_decimal_str
from .lattice import IntVec2, RatVec2, cramer, det2, inner
from .psi import check_admissible, psi_argument, psi_eval

INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class BestApproxRecord:
    m: IntVec2
    sq_norm: int
    err: Fraction
    normalized: Fraction

    def to_json(self) -> dict:
        return {
            "m": self.m.to_json(),
            "sq_norm": str(self.sq_norm),
            "err": fraction_str(self.err),
            "normalized": fraction_str(self.normalized),
        }


class BestApproxList(list):
    """Records in order; `zero_at` is the first vector with zero error, if the search stopped there."""

    zero_at: IntVec2 | None = None
    bound: int = 0


def normalized_error(alpha: RatVec2, m: IntVec2) -> Fraction:
    if m.is_zero():
        raise ValueError("m must be nonzero")
    return dist_to_z(inner(alpha, m)) * m.sq_norm


def default_workers() -> int:
    env = os.environ.get("DIOPHANTINE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _stripe(xs: range, lo: int, hi: int, p1: int, p2: int, Q: int, champion: int | None, dtype):
    """Points with lo <= |m|^2 < hi and x in xs (canonical half plane), as (n, e, x, y) rows."""
    out = []
    for x in xs:
        rest_hi = hi - 1 - x * x
        if rest_hi < 0:
            break
        y_max = math.isqrt(rest_hi)
        rest_lo = lo - x * x
        y_min = 0 if rest_lo <= 0 else math.isqrt(rest_lo - 1) + 1
        if y_min > y_max:
            continue
        pos = np.arange(max(y_min, 1 if x == 0 else 0), y_max + 1, dtype=dtype)
        if x == 0:
            ys = pos
        else:
            neg = -np.arange(max(y_min, 1), y_max + 1, dtype=dtype)[::-1]
            ys = np.concatenate([neg, pos])
        if ys.size == 0:
            continue
        r = (p1 * x + p2 * ys) % Q
        e = np.minimum(r, Q - r)
        if champion is not None:
            keep = e < champion
            ys, e = ys[keep], e[keep]
            if ys.size == 0:
                continue
        n = x * x + ys * ys
        xcol = np.full(ys.shape, x, dtype=dtype)
        out.append(np.stack([n, e, xcol, ys], axis=1))
    return out


def best_approximations(
    alpha: RatVec2, sq_norm_bound: int, screening: bool = True, workers: int | None = None
) -> BestApproxList:
    """Best approximations m with 0 < |m|^2 <= sq_norm_bound, one per +-pair, by increasing norm.

    Within a shell of equal norm all pairs attaining the shell minimum are
    records when that minimum beats every shorter vector. Enumeration stops
    at the first shell containing a zero error.
    """
    Q = math.lcm(alpha.x1.denominator, alpha.x2.denominator)
    p1, p2 = int(alpha.x1 * Q) % Q, int(alpha.x2 * Q) % Q
    radius = math.isqrt(max(sq_norm_bound, 0))
    dtype = np.int64 if 2 * Q * (radius + 1) < INT64_SAFE and sq_norm_bound < INT64_SAFE else object
    workers = workers or default_workers()
    result = BestApproxList()
    result.bound = sq_norm_bound
    best_e: int | None = None  # minimal error over all norms seen so far
    lo = 1
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while lo <= sq_norm_bound:
            hi = min(2 * lo, sq_norm_bound + 1)
            x_max = math.isqrt(hi - 1)
            champion = best_e if screening else None
            size = max(1, (x_max + 1 + 4 * workers - 1) // (4 * workers))
            stripes = [range(s, min(s + size, x_max + 1)) for s in range(0, x_max + 1, size)]
            args = [(xs, lo, hi, p1, p2, Q, champion, dtype) for xs in stripes]
            if pool is None:
                chunks = [_stripe(*a) for a in args]
            else:
                chunks = list(pool.map(lambda a: _stripe(*a), args))
            rows = [arr for chunk in chunks for arr in chunk]
            if rows:
                pts = np.concatenate(rows)
                order = np.lexsort((pts[:, 3], pts[:, 2], pts[:, 1], pts[:, 0]))
                pts = pts[order]
                i = 0
                total = len(pts)
                while i < total:
                    n = int(pts[i, 0])
                    j = i
                    while j < total and int(pts[j, 0]) == n:
                        j += 1
                    e_min = int(pts[i, 1])
                    if best_e is None or e_min < best_e:
                        for row in pts[i:j]:
                            if int(row[1]) != e_min:
                                break
                            m = IntVec2(int(row[2]), int(row[3]))
                            err = Fraction(e_min, Q)
                            result.append(BestApproxRecord(m, n, err, err * n))
                        best_e = e_min
                        if e_min == 0:
                            result.zero_at = result[-1].m
                            return result
                    i = j
            lo = hi
    finally:
        if pool is not None:
            pool.shutdown()
    return result


# ---------------------------------------------------------------- audit


@dataclass
class StepAudit:
    k: int
    sq_norm: int
    det_ratio: Fraction
    checks: dict = field(default_factory=dict)
    margin_left: QuadReal | None = None
    margin_right: QuadReal | None = None
    normalized_err: Fraction | None = None
    status: str = "structurally verified, not oracle-verified"

    def to_json(self) -> dict:
        d = {
            "k": self.k,
            "sq_norm": str(self.sq_norm),
            "det_ratio": fraction_str(self.det_ratio),
            "checks": dict(self.checks),
            "status": self.status,
        }
        if self.margin_left is not None:
            d["normalized_err"] = fraction_str(self.normalized_err)
            d["margin_left"] = self.margin_left.to_json()
            d["margin_right"] = self.margin_right.to_json()
        return d


@dataclass
class AuditReport:
    steps: list[StepAudit] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    oracle_bound: int = 0
    oracle_records: int = 0
    prefix_match: int = 0
    oracle_zero_at: IntVec2 | None = None
    K: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def fail(self, check: str, k: int | None, witness) -> None:
        self.failures.append({"check": check, "k": k, "witness": str(witness)})

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "K": self.K,
            "oracle_bound": str(self.oracle_bound),
            "oracle_records": self.oracle_records,
            "prefix_match": self.prefix_match,
            "oracle_zero_at": self.oracle_zero_at.to_json() if self.oracle_zero_at else None,
            "failures": self.failures,
            "steps": [s.to_json() for s in self.steps],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def table(self) -> str:
        names = STATE_CHECKS + STEP_CHECKS
        head = f"{'k':>3} {'|m_k|^2':>22} {'det/|m_k|^2':>10}  {' '.join(f'{c:>5}' for c in names)}  {'left slack':>12} {'right slack':>12}"
        lines = [head]
        for s in self.steps:
            flags = " ".join(f"{('ok' if s.checks.get(c, True) else 'FAIL'):>5}" for c in names)
            if s.margin_left is not None:
                ml = to_decimal_str(s.margin_left, 6)
                mr = to_decimal_str(s.margin_right, 6)
            else:
                ml = mr = "-"
            lines.append(f"{s.k:>3} {s.sq_norm:>22} {float(s.det_ratio):>10.5f}  {flags}  {ml:>12} {mr:>12}")
        lines.append(f"oracle: bound {self.oracle_bound}, prefix match {self.prefix_match}")
        lines.append("PASS" if self.ok else f"FAIL ({len(self.failures)}): first {self.failures[0]}")
        return "\n".join(lines) + "\n"


def theorem_band(psi: Fraction) -> tuple[QuadReal, QuadReal]:
    """(psi - 4 gamma psi^2, psi + gamma psi^2)."""
    sq = QuadReal(psi * psi)
    return QuadReal(psi) - 4 * GAMMA * sq, QuadReal(psi) + GAMMA * sq


# rational directions of norm 1 spread around the circle
_UNIT = [
    (Fraction(1), Fraction(0)), (Fraction(4, 5), Fraction(3, 5)), (Fraction(3, 5), Fraction(4, 5)),
    (Fraction(0), Fraction(1)), (Fraction(-3, 5), Fraction(4, 5)), (Fraction(-4, 5), Fraction(3, 5)),
    (Fraction(-1), Fraction(0)), (Fraction(-4, 5), Fraction(-3, 5)), (Fraction(-3, 5), Fraction(-4, 5)),
    (Fraction(0), Fraction(-1)), (Fraction(3, 5), Fraction(-4, 5)), (Fraction(4, 5), Fraction(-3, 5)),
    (Fraction(5, 13), Fraction(12, 13)), (Fraction(-5, 13), Fraction(-12, 13)),
    (Fraction(12, 13), Fraction(-5, 13)), (Fraction(-12, 13), Fraction(5, 13)),
]


def probe_points(state: StepState, count: int = 8) -> list[RatVec2]:
    """Centre of the half-ball plus `count` rational points at radius R_lower on its kept side."""
    pts = [state.alpha]
    for u1, u2 in _UNIT:
        if state.delta * (u1 * state.m_k.x1 + u2 * state.m_k.x2) <= 0:
            pts.append(RatVec2(state.alpha.x1 + state.R_lower * u1, state.alpha.x2 + state.R_lower * u2))
        if len(pts) == count + 1:
            break
    return pts


def _divisibility_ok(alpha: RatVec2, m_k: IntVec2, m_k1: IntVec2) -> tuple[bool, str]:
    """Distances from alpha to half-integer lines <a, x> = lam, a in Z^2/2, scaled by 2|a| det, are integers.

    dist^2 * (2 |a| det)^2 = (<a, alpha> - lam)^2 * 4 det^2 must be a square integer.
    """
    d = abs(det2(m_k, m_k1))
    half = Fraction(1, 2)
    normals = [
        RatVec2(half * m_k.x1, half * m_k.x2),
        RatVec2(half * (m_k.x1 + m_k1.x1), half * (m_k.x2 + m_k1.x2)),
        RatVec2(half, half),
        RatVec2(Fraction(1), Fraction(-3, 2)),
    ]
    for a in normals:
        v = inner(a, alpha)
        base = Fraction(math.floor(2 * v), 2)
        for lam in (base, base + half, base - 1):
            q = (v - lam) ** 2 * 4 * d * d
            if q.denominator != 1 or math.isqrt(q.numerator) ** 2 != q.numerator:
                return False, f"a={a}, lambda={lam}"
    return True, ""


def _replay(trace: ConstructionTrace, report: AuditReport) -> None:
    """Re-derive every stored quantity from psi_spec, mode and branch, and compare."""
    steps = trace.steps
    spec, mode = trace.psi_spec, trace.mode
    tape = Branch(trace.branch)
    check_admissible(spec)
    psi1 = psi_eval(spec, psi_argument(mode, 1, 1))
    expect = base_case(psi1, tape)
    choices = list(expect.ties)
    first = steps[0]
    for name in ("k", "m_k", "m_k1", "alpha", "delta", "R_lower", "R_upper", "psi", "rank", "lexmin_pick"):
        if getattr(first, name) != getattr(expect, name):
            report.fail("base", 1, f"{name}={getattr(first, name)}, expected {getattr(expect, name)}")
    prev_true = expect
    for i in range(1, len(steps)):
        s, prev = steps[i], steps[i - 1]
        k = prev.k
        if s.k != prev.k + 1:
            report.fail("k-sequence", s.k, f"step {i} has k={s.k} after k={prev.k}")
        if s.m_k != prev.m_k1:
            report.fail("continuity", s.k, f"m_k={s.m_k} but previous m_k1={prev.m_k1}")
        psi_next = psi_eval(spec, psi_argument(mode, k + 1, prev.m_k1.sq_norm), prev=prev.psi)
        if (s.psi.value, s.psi.lower, s.psi.upper) != (psi_next.value, psi_next.lower, psi_next.upper):
            report.fail("psi", s.k, f"psi_hat={s.psi.value}, expected {psi_next.value}")
        r_lo, r_hi = radius_enclosure(s.m_k1, abs(det2(s.m_k, s.m_k1)) or 1)
        if (s.R_lower, s.R_upper) != (r_lo, r_hi):
            report.fail("R", s.k, f"R enclosure [{s.R_lower}, {s.R_upper}], expected [{r_lo}, {r_hi}]")
        # branch consumption and the alpha recurrence
        pos = prev_true.branch_pos
        tie_bit = 0
        val = inner(prev.alpha, s.m_k1)
        if val - math.floor(val) == Fraction(1, 2):
            tie_bit = tape.bit(pos)
            choices.append(("nearest-int", k + 1, tie_bit))
            pos += 1
        try:
            alpha = solve_alpha_next(prev.alpha, prev.m_k1, s.m_k1, tie_bit=tie_bit)
            if alpha != s.alpha:
                report.fail("alpha", s.k, f"alpha={s.alpha}, recurrence gives {alpha}")
        except Exception as exc:  # noqa: BLE001
            report.fail("alpha", s.k, f"recurrence failed: {exc}")
        side_bit = 0
        if inner(prev.m_k, prev.m_k1) == 0:
            side_bit = tape.bit(pos)
            choices.append(("half-ball", k + 1, side_bit))
            pos += 1
        try:
            delta = half_ball_side(prev.delta, prev.m_k, prev.m_k1, side_bit)
            if delta != s.delta:
                report.fail("delta", s.k, f"delta={s.delta}, expected {delta}")
        except Exception as exc:  # noqa: BLE001
            report.fail("delta", s.k, str(exc))
        # rank among admissible candidates and agreement with the preferred point
        try:
            _, cands, lexmin_x = _prepare(prev, s.psi)
            xs = [c.x for c in itertools.islice(cands, s.rank + 1)]
            if xs[s.rank:] != [s.m_k1]:
                report.fail("rank", s.k, f"m_k1={s.m_k1} is not admissible candidate #{s.rank}")
            if s.lexmin_pick != (s.m_k1 == lexmin_x):
                report.fail("lexmin_pick", s.k, f"lexmin_pick={s.lexmin_pick}, preferred point {lexmin_x}")
        except Exception as exc:  # noqa: BLE001
            report.fail("candidates", s.k, str(exc))
        prev_true = StepState(
            k=s.k, m_k=s.m_k, m_k1=s.m_k1, alpha=s.alpha, delta=s.delta, R_lower=s.R_lower,
            R_upper=s.R_upper, psi=s.psi, branch_pos=pos,
        )
    want = [{"k": k, "kind": kind, "bit": bit} for kind, k, bit in choices]
    if trace.branch_choices != want:
        report.fail("branch_choices", None, f"{trace.branch_choices} != {want}")


def audit_trace(trace: ConstructionTrace, oracle_sq_norm_budget: int, workers: int | None = None) -> AuditReport:
    steps = trace.steps
    K = len(steps)
    report = AuditReport(K=K)
    if K < 2:
        report.fail("length", None, f"trace has {K} states; at least 2 are needed")
        if not steps:
            return report
    try:
        _replay(trace, report)
    except Exception as exc:  # noqa: BLE001
        report.fail("replay", None, repr(exc))

    for i, s in enumerate(steps):
        n0 = s.m_k.sq_norm
        det = abs(det2(s.m_k, s.m_k1))
        sa = StepAudit(s.k, n0, Fraction(det, n0) if n0 else Fraction(0))
        try:
            checks = state_checks(s)
        except Exception as exc:  # noqa: BLE001
            checks = {c: False for c in STATE_CHECKS}
            report.fail("state", s.k, repr(exc))
        if i > 0:
            prev = steps[i - 1]
            try:
                lam1, _ = cramer(s.m_k1, prev.m_k, prev.m_k1)
                checks.update(step_checks(prev, s, lam1))
            except Exception as exc:  # noqa: BLE001
                checks.update({c: False for c in STEP_CHECKS})
                report.fail("step", s.k, repr(exc))
        else:
            checks.update({c: True for c in STEP_CHECKS})
        ok, witness = _divisibility_ok(s.alpha, s.m_k, s.m_k1) if det else (False, "singular basis")
        checks["divisibility"] = ok
        if not ok:
            report.fail("divisibility", s.k, witness)
        for name, value in checks.items():
            if not value and name != "divisibility":
                report.fail(name, s.k, f"m_k={s.m_k}, m_k1={s.m_k1}, alpha={s.alpha}")
        stored = s.checks
        expected_keys = set(STATE_CHECKS) | set(STEP_CHECKS) | {"R"}
        if set(stored) != expected_keys or not all(v is True for v in stored.values()):
            report.fail("stored-checks", s.k, f"stored flags {stored}")
        sa.checks = checks
        report.steps.append(sa)

    box = enclosure_box(steps[-1])
    stored_box = trace.final_enclosure_stored
    if stored_box is not None and stored_box != box:
        report.fail("final_enclosure", K, f"{stored_box} != {box}")

    _theorem_and_oracle(trace, report, oracle_sq_norm_budget, workers)
    return report


def _theorem_and_oracle(trace: ConstructionTrace, report: AuditReport, budget: int, workers) -> None:
    steps = trace.steps
    K = len(steps)
    if K < 3:
        return
    alpha_K = steps[-1].alpha
    vecs = [s.m_k for s in steps]  # m_1 .. m_K
    # theorem inequality at alpha_K and at probe points of Omega_{k+1}, k <= K - 2
    for idx in range(K - 2):
        s = steps[idx]
        lower, upper = theorem_band(s.psi.value)
        e = normalized_error(alpha_K, s.m_k)
        sa = report.steps[idx]
        sa.normalized_err = e
        sa.margin_left = QuadReal(e) - lower
        sa.margin_right = upper - QuadReal(e)
        if not (sa.margin_left.sign() > 0 and sa.margin_right.sign() >= 0):
            report.fail("theorem", s.k, f"normalized error {e} outside band at alpha_K")
            sa.checks["theorem"] = False
        else:
            sa.checks["theorem"] = True
        probes_ok = True
        for p in probe_points(steps[idx + 1]):
            pe = normalized_error(p, s.m_k)
            if not (lower < QuadReal(pe) and QuadReal(pe) <= upper):
                report.fail("theorem-probe", s.k, f"probe {p} gives {pe}")
                probes_ok = False
                break
        sa.checks["theorem_probes"] = probes_ok
    # oracle prefix: largest j <= K - 2 with |m_j|^2 within budget
    j = 0
    while j < K - 2 and vecs[j].sq_norm <= budget:
        j += 1
    if j == 0:
        return
    bound = vecs[j - 1].sq_norm
    recs = best_approximations(alpha_K, bound, workers=workers)
    report.oracle_bound = bound
    report.oracle_records = len(recs)
    report.oracle_zero_at = recs.zero_at
    match = 0
    for r, m in zip(recs, vecs[:j]):
        if r.m != m.canonical() or r.err != dist_to_z(inner(alpha_K, m)):
            break
        match += 1
    report.prefix_match = match
    for idx in range(match):
        report.steps[idx].status = "oracle-verified"
    if match != j or len(recs) != j:
        extra = recs[match] if match < len(recs) else None
        want = vecs[match] if match < j else None
        report.fail("oracle", match + 1, f"oracle record {extra and extra.m} vs trace m={want}")


def _first_difference(a, b, path=()):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b), key=str):
            if key not in a or key not in b:
                return path + (key,)
            d = _first_difference(a[key], b[key], path + (key,))
            if d is not None:
                return d
        return None
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return path
        for i, (x, y) in enumerate(zip(a, b)):
            d = _first_difference(x, y, path + (i,))
            if d is not None:
                return d
        return None
    return None if a == b and type(a) is type(b) else path


def audit_document(doc: dict, oracle_sq_norm_budget: int, workers: int | None = None) -> AuditReport:
    """Audit a trace as read from JSON: it must load, be canonically encoded, and pass audit_trace."""
    try:
        trace = ConstructionTrace.from_json(doc)
    except Exception as exc:  # noqa: BLE001
        report = AuditReport()
        report.fail("parse", None, repr(exc))
        return report
    report = audit_trace(trace, oracle_sq_norm_budget, workers)
    where = _first_difference(doc, trace.to_json())
    if where is not None:
        report.fail("encoding", None, f"field {'/'.join(map(str, where))} is not in canonical form")
    return report
