"""Command-line front end.

Exit codes: 0 ok, 1 usage or I/O, 2 construction failure, 3 audit failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .construction import ConstructionTrace, run_construction
from .errors import ConstructionFailed, InadmissiblePsi, InadmissibleSpec, StepVerificationFailed
from .exact import QuadReal, parse_fraction, to_decimal_str
from .psi import PsiSpec
from .verify import audit_document, default_workers, theorem_band

EXIT_OK, EXIT_USAGE, EXIT_CONSTRUCT, EXIT_AUDIT = 0, 1, 2, 3
CSV_COLUMNS = ["k", "sq_norm", "psi_hat", "lower_band", "normalized_err", "upper_band", "margin_left", "margin_right"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_construct(args) -> int:
    if args.steps < 2:
        print("error: K must be ≥ 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = PsiSpec.parse(args.psi)
    except InadmissibleSpec as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCT
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: bad psi spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        trace = run_construction(spec, args.steps, args.mode, args.seed, lookahead=args.lookahead)
    except (InadmissibleSpec, InadmissiblePsi, StepVerificationFailed, ConstructionFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _write(args.output, trace.dumps())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.info("wrote %d states", trace.K)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        text = Path(args.trace).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        doc = json.loads(text)
    except ValueError as exc:
        print(f"audit failed: trace is not JSON: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    report = audit_document(doc, args.budget, workers=args.workers)
    try:
        if args.output:
            _write(args.output, report.dumps())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.table:
        sys.stdout.write(report.table())
    if not report.ok:
        f = report.failures[0]
        print(f"audit failed: {f['check']} at k={f['k']}: {f['witness']}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def report_rows(trace: ConstructionTrace, audit: dict) -> list[list[str]]:
    rows = []
    by_k = {s.k: s for s in trace.steps}
    for entry in audit.get("steps", []):
        if "margin_left" not in entry:
            continue
        k = entry["k"]
        psi = by_k[k].psi.value
        lower, upper = theorem_band(psi)
        rows.append([
            str(k),
            entry["sq_norm"],
            to_decimal_str(psi),
            to_decimal_str(lower),
            to_decimal_str(parse_fraction(entry["normalized_err"])),
            to_decimal_str(upper),
            to_decimal_str(QuadReal.from_json(entry["margin_left"])),
            to_decimal_str(QuadReal.from_json(entry["margin_right"])),
        ])
    return rows


def cmd_report(args) -> int:
    try:
        trace = ConstructionTrace.loads(Path(args.trace).read_text())
        audit = json.loads(Path(args.audit).read_text())
        rows = report_rows(trace, audit)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not rows:
        print("error: audit has no steps with theorem margins", file=sys.stderr)
        return EXIT_USAGE
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    try:
        _write(args.output, buf.getvalue())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="diophantine", description="Construct and audit planar linear forms of prescribed Diophantine type.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("construct", help="run the construction and write a trace")
    c.add_argument("--psi", required=True, help='"kind:c[:exponent|shift]" or a JSON file')
    c.add_argument("--steps", type=int, required=True, metavar="K")
    c.add_argument("--mode", choices=("norm", "index"), default="norm")
    c.add_argument("--seed", default="", help="branch bitstring consumed at tie points")
    c.add_argument("--lookahead", type=int, default=2, help="extra steps the search must be able to extend")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", help="audit a trace")
    v.add_argument("trace")
    v.add_argument("--budget", type=int, default=10**8, help="largest squared norm for brute force")
    v.add_argument("--workers", type=int, default=None)
    v.add_argument("--table", action="store_true", help="print a per-step table")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="tabulate theorem margins as CSV")
    r.add_argument("--trace", required=True)
    r.add_argument("--audit", required=True)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if getattr(args, "budget", 1) is not None and getattr(args, "budget", 1) < 1:
        print("error: budget must be ≥ 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "workers", None) is None and args.command == "verify":
        args.workers = default_workers()
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
