"""Command line entry point: ``homcalc check FILE``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .core import HomcalcError
from .decomposer import dump_decomposition
from .driver import is_homomorphism
from .frontend import load_program
from .gen import GenConfig
from .leaf import sub_terminals
from .sygus import ExportError, export_sygus, file_name
from .synth import Budget, SynthLog

EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NOINPUT = 66
EXIT_CANTCREAT = 73


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seconds(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be a positive number of seconds")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="homcalc", description="Decide whether a dataframe aggregation is a homomorphism.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    check = sub.add_parser("check", help="check one program file")
    check.add_argument("file", type=Path)
    check.add_argument("--seed", type=int, default=None, help="random seed (default: $HOMCALC_SEED or 0)")
    check.add_argument("--trials", type=_count, default=1000)
    check.add_argument("--max-rows", type=_count, default=6)
    check.add_argument("--budget-leaf", type=_seconds, default=20.0, metavar="SEC")
    check.add_argument("--budget-refute", type=_seconds, default=5.0, metavar="SEC")
    check.add_argument("--budget-oracle", type=_seconds, default=5.0, metavar="SEC")
    check.add_argument("--emit-sygus", type=Path, default=None, metavar="DIR",
                       help="write one SyGuS-IF file per leaf problem")
    check.add_argument("--dump-decomp", action="store_true", help="print the decompositions to stderr")
    check.add_argument("--require-commutative", action="store_true")
    check.add_argument("--json", action="store_true", help="machine-readable report")
    check.add_argument("--timings", action="store_true", help="report wall-clock time per phase")
    return parser


def _seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("HOMCALC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"homcalc: HOMCALC_SEED is not an integer: {env!r}") from None


def _emit_sygus(log: SynthLog, out: Path, commutative: bool) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for problem, solved in log.leaf_problems:
        extra = sub_terminals(problem.state_type, list(solved))
        path = out / file_name(problem)
        path.write_text(export_sygus(problem, extra, commutative), encoding="utf-8")
        written.append(path)
    return written


def run_cli(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.trials < 1:
        print("homcalc: --trials must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    seed = _seed(args.seed)
    try:
        t = time.perf_counter()
        text = args.file.read_text(encoding="utf-8")
    except OSError as e:
        print(f"homcalc: cannot read {args.file}: {e.strerror or e}", file=sys.stderr)
        return EXIT_NOINPUT
    try:
        program = load_program(text)
    except HomcalcError as e:
        print(f"homcalc: {args.file}: {e}", file=sys.stderr)
        return EXIT_DATA
    parse_seconds = time.perf_counter() - t

    cfg = GenConfig(seed=seed, trials=args.trials, max_rows=args.max_rows)
    budget = Budget(refute_seconds=args.budget_refute, leaf_seconds=args.budget_leaf,
                    oracle_seconds=args.budget_oracle, commutative=args.require_commutative)
    log = SynthLog()
    try:
        verdict = is_homomorphism(program, cfg, budget, log, parse_seconds)
    except HomcalcError as e:
        print(f"homcalc: {args.file}: {e}", file=sys.stderr)
        return EXIT_DATA

    if args.dump_decomp:
        for path, dec in log.decompositions:
            print(f"-- {path}", file=sys.stderr)
            print(dump_decomposition(dec), file=sys.stderr)
    if args.emit_sygus is not None:
        try:
            for path in _emit_sygus(log, args.emit_sygus, args.require_commutative):
                print(f"wrote {path}", file=sys.stderr)
        except ExportError as e:
            print(f"homcalc: SyGuS export failed: {e}", file=sys.stderr)
            return EXIT_DATA
        except OSError as e:
            print(f"homcalc: cannot write {args.emit_sygus}: {e.strerror or e}", file=sys.stderr)
            return EXIT_CANTCREAT

    if args.json:
        print(verdict.json_text(args.timings))
    else:
        print(verdict.describe())
        if args.timings:
            for phase, secs in verdict.timings:
                print(f"{phase}: {secs * 1000:.0f} ms")
    return verdict.exit_code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
