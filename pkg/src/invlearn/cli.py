"""Command-line entry point: ``invlearn infer FILE`` and ``invlearn corpus DIR``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import INVARIANT, NO_INVARIANT, TIMEOUT, EngineConfig, infer, run_corpus
from .frontend import ParseError, load
from .interpolate import DEFAULT_DNF_CAP
from .predgen import EXIT_UNDER, PLAIN_UNDER
from .smtlib import ExternalSolverError
from .solver import SolverConfig

EXIT_CODES = {INVARIANT: 0, TIMEOUT: 2, NO_INVARIANT: 3}
USAGE_ERROR = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v

    return conv


def _engine_options(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--timeout", type=_positive(float), default=60.0, metavar="S", help="wall-clock seconds per run")
    p.add_argument("--max-restarts", type=int, default=10_000, metavar="N")
    p.add_argument("--solver", choices=("builtin", "external"), default="builtin")
    p.add_argument(
        "--solver-cmd",
        default="z3 -in -smt2",
        metavar="TMPL",
        help="external solver command; reads the script on stdin unless it contains {file}",
    )
    p.add_argument("--dnf-cap", type=_positive(int), default=DEFAULT_DNF_CAP, metavar="N")
    p.add_argument(
        "--under",
        choices=(EXIT_UNDER, PLAIN_UNDER),
        default=EXIT_UNDER,
        help="under-approximation: pre | (post & !guard) (exit) or pre | post (plain)",
    )
    p.add_argument("--stats-json", type=Path, metavar="FILE")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invlearn", description="Infer loop invariants by learning Boolean combinations of predicates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="infer an invariant for one annotated loop")
    p.add_argument("file", type=Path)
    _engine_options(p)
    p.add_argument("--trace", type=Path, metavar="FILE", help="write query/answer events as JSON lines")

    c = sub.add_parser("corpus", help="run every *.loop file in a directory")
    c.add_argument("dir", type=Path)
    c.add_argument("--runs", type=_positive(int), default=1, metavar="K")
    _engine_options(c)
    return parser


def _config(args, trace=None) -> EngineConfig:
    return EngineConfig(
        seed=args.seed,
        max_restarts=args.max_restarts,
        timeout_s=args.timeout,
        solver=SolverConfig(backend=args.solver, command=args.solver_cmd),
        dnf_cap=args.dnf_cap,
        under=args.under,
        trace=trace,
    )


def _write_json(path, data):
    if path is not None:
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _cmd_infer(args) -> int:
    try:
        loop = load(args.file)
    except ParseError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"{args.file}: {exc.strerror}", file=sys.stderr)
        return USAGE_ERROR
    result = infer(loop, _config(args, args.trace))
    stats = result.to_json()
    _write_json(args.stats_json, stats)
    print(f"{stats['example']}: {stats['outcome']}")
    if stats["invariant"] is not None:
        print(stats["invariant"])
    print(
        f"P={stats['P']} MEM={stats['MEM']} EQ={stats['EQ']} RE={stats['RE']} time={stats['time_ms']}ms",
        file=sys.stderr,
    )
    return EXIT_CODES[result.outcome]


def _cmd_corpus(args) -> int:
    if not args.dir.is_dir():
        print(f"{args.dir}: not a directory", file=sys.stderr)
        return USAGE_ERROR
    paths = sorted(args.dir.glob("*.loop"))
    report = run_corpus(paths, _config(args), runs=args.runs)
    data = report.to_json()
    _write_json(args.stats_json, data)
    header = f"{'example':<20} {'inv':>7} {'P':>6} {'MEM':>8} {'EQ':>7} {'RE':>6} {'ms':>9}"
    print(header)
    for row in data["rows"]:
        print(
            f"{row['example']:<20} {row['invariants']:>3}/{row['runs']:<3} {row['P']['mean']:>6.1f} "
            f"{row['MEM']['mean']:>8.1f} {row['EQ']['mean']:>7.1f} {row['RE']['mean']:>6.1f} {row['time_ms']['mean']:>9.0f}"
        )
    for err in data["errors"]:
        print(f"error: {err['path']}: {err['error']}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "infer":
            return _cmd_infer(args)
        return _cmd_corpus(args)
    except ExternalSolverError as exc:
        print(f"external solver: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
