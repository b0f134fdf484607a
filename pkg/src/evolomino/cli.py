"""Command line front end: solve, verify, generate, export, bench and stats.

Exit codes: 0 feasible / ok, 1 infeasible / rejected, 2 timed out,
64 usage error, 65 malformed input or failed generation, 66 missing file.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench as bench_mod
from .generator import GenerationFailed, GenParams, generate
from .grid import (Puzzle, PuzzleFormatError, SolutionGrid, parse_puzzle, parse_solution,
                   serialize_puzzle, serialize_solution)
from .model import BuildOptions, build_model, export_lp, stats
from .rules import verify
from .solver import Limits, Search, Status, enumerate_solutions

EXIT_CODES = {Status.FEASIBLE: 0, Status.INFEASIBLE: 1, Status.TIMED_OUT: 2}
EX_USAGE, EX_DATAERR, EX_NOINPUT = 64, 65, 66

SCHEMA_PATH = Path(__file__).with_name("cli_output.schema.json")


class InputError(Exception):
    def __init__(self, message: str, code: int = EX_DATAERR):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer: {text}")
    return v


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise InputError(f"{path}: no such file", EX_NOINPUT)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}")


def _load_puzzle(path: str) -> Puzzle:
    try:
        return parse_puzzle(_read(path))
    except PuzzleFormatError as exc:
        raise InputError(f"{path}: {exc}")


def _load_solution(path: str) -> SolutionGrid:
    try:
        return parse_solution(_read(path))
    except PuzzleFormatError as exc:
        raise InputError(f"{path}: {exc}")


def _rows(s: SolutionGrid, p: Puzzle) -> list[str]:
    return serialize_solution(s, p).splitlines()[3:]


def _emit_json(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _limits(args) -> Limits:
    return Limits(time=args.time_limit, nodes=args.node_limit)


# -- subcommands ------------------------------------------------------------------

def cmd_solve(args) -> int:
    p = _load_puzzle(args.puzzle)
    m = build_model(p)
    if args.export_lp:
        Path(args.export_lp).write_text(export_lp(m))
    if args.enumerate:
        return _enumerate(args, p, m)
    out = Search(m, _limits(args), seed=args.seed).run()
    code = EXIT_CODES[out.status]
    search_stats = {"nodes": out.stats.nodes, "failures": out.stats.failures,
                    "propagations": out.stats.propagations,
                    "wall_time": round(out.stats.wall_time, 6)}
    if args.json:
        _emit_json({"command": "solve", "status": out.status.value, "exit_code": code,
                    "solution": _rows(out.solution, p) if out.solution else None,
                    "stats": search_stats})
        return code
    if out.solution is not None:
        sys.stdout.write(serialize_solution(out.solution, p))
    else:
        print(out.status.value)
    if args.stats:
        for k, v in search_stats.items():
            print(f"{k}: {v}", file=sys.stderr)
    return code


def _enumerate(args, p: Puzzle, m) -> int:
    res = enumerate_solutions(m, args.enumerate, _limits(args))
    if res.solutions:
        code = 0
    else:
        code = EXIT_CODES[Status.TIMED_OUT if res.truncated else Status.INFEASIBLE]
    if res.complete:
        verdict = "proved unique" if len(res) == 1 else f"{len(res)} solutions, search complete"
    elif res.truncated:
        verdict = f"{len(res)} solutions before the time limit"
    else:
        verdict = f"cap of {args.enumerate} reached"
    if args.json:
        _emit_json({"command": "enumerate", "count": len(res), "complete": res.complete,
                    "truncated": res.truncated, "verdict": verdict, "exit_code": code,
                    "solutions": [_rows(s, p) for s in res.solutions]})
        return code
    for n, s in enumerate(res.solutions):
        if n:
            print()
        sys.stdout.write(serialize_solution(s, p))
    print(verdict)
    return code


def cmd_verify(args) -> int:
    p = _load_puzzle(args.puzzle)
    s = _load_solution(args.solution)
    if (s.rows, s.cols) != (p.rows, p.cols):
        raise InputError(f"{args.solution}: solution is {s.rows}x{s.cols}, puzzle is {p.rows}x{p.cols}")
    bad = verify(p, s)
    if args.json:
        _emit_json({"command": "verify", "ok": not bad, "exit_code": int(bool(bad)),
                    "violations": [{"rule": v.rule.value, "detail": v.detail,
                                    "cells": [[c[0], c[1]] for c in v.cells]} for v in bad]})
    elif bad:
        for v in bad:
            print(v)
    else:
        print("OK")
    return 1 if bad else 0


def cmd_generate(args) -> int:
    seed = args.seed
    if seed is None:
        seed = secrets.randbits(64)
        print(f"seed: {seed}", file=sys.stderr)
    kw = {"seed": seed}
    if args.target_fill is not None:
        kw["target_fill"] = args.target_fill
    if args.tries is not None:
        kw["max_tries"] = args.tries
    if args.probe_time_limit is not None:
        kw["probe_time_limit"] = args.probe_time_limit
    try:
        g = generate(args.rows, args.cols, GenParams(**kw))
    except GenerationFailed as exc:
        raise InputError(str(exc))
    name = args.name or f"evolomino_{args.rows}x{args.cols}_{seed}"
    meta = g.metadata(name)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.puzzle").write_text(serialize_puzzle(g.puzzle))
        (out / f"{name}.solution").write_text(serialize_solution(g.solution, g.puzzle))
        with open(out / "metadata.jsonl", "a") as fh:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
    if args.json:
        _emit_json({"command": "generate", "exit_code": 0, "metadata": meta,
                    "puzzle": serialize_puzzle(g.puzzle),
                    "solution": serialize_solution(g.solution, g.puzzle)})
    elif not args.out:
        sys.stdout.write(serialize_puzzle(g.puzzle))
        print()
        sys.stdout.write(serialize_solution(g.solution, g.puzzle))
    else:
        print(f"wrote {name}.puzzle and {name}.solution to {args.out}")
    return 0


def _options(args) -> BuildOptions:
    return BuildOptions(tight_big_m=args.tight_big_m, full_index_sets=args.full_index_sets)


def cmd_export(args) -> int:
    text = export_lp(build_model(_load_puzzle(args.puzzle), _options(args)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    m = build_model(_load_puzzle(args.puzzle), _options(args))
    st = stats(m, args.convention)
    if args.json:
        _emit_json({"command": "stats", "exit_code": 0, **st.as_dict()})
    else:
        print(f"convention: {st.convention}")
        print(st.table())
    return 0


def cmd_bench(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        raise InputError(f"{args.dir}: not a directory", EX_NOINPUT)
    records = bench_mod.run(directory, Limits(time=args.time_limit), args.jobs)
    bench_mod.write_csv(records, Path(args.csv))
    summaries = bench_mod.summarize(records)
    table = bench_mod.markdown_table(summaries)
    if args.table:
        Path(args.table).write_text(table)
    if args.json:
        _emit_json({"command": "bench", "exit_code": 0, "instances": len(records),
                    "errors": sum(r.status == bench_mod.ERROR for r in records),
                    "summaries": [{"size": s.size, "count": s.count, "vars": s.vars,
                                   "constraints": s.constraints, "q1": s.q1,
                                   "median": s.median, "q3": s.q3,
                                   "outliers": list(s.outliers)} for s in summaries]})
    else:
        sys.stdout.write(table)
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evolomino", description="Solve, verify, generate and benchmark "
                     "Evolomino puzzles through an integer linear model.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str, func) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("solve", "solve a puzzle file", cmd_solve)
    sp.add_argument("puzzle")
    sp.add_argument("--time-limit", type=_positive_float, metavar="SECONDS")
    sp.add_argument("--node-limit", type=_positive_int, metavar="NODES")
    sp.add_argument("--enumerate", type=_positive_int, metavar="CAP",
                    help="list up to CAP solutions and report whether the list is complete")
    sp.add_argument("--export-lp", metavar="PATH", help="also write the model in LP format")
    sp.add_argument("--stats", action="store_true", help="print search statistics to stderr")
    sp.add_argument("--seed", type=_seed, help="tie-breaking seed for the branching order")
    sp.add_argument("--json", action="store_true")

    sp = add("verify", "check a solution against the rules", cmd_verify)
    sp.add_argument("puzzle")
    sp.add_argument("solution")
    sp.add_argument("--json", action="store_true")

    sp = add("generate", "generate a puzzle with a unique solution", cmd_generate)
    sp.add_argument("--rows", type=int, required=True)
    sp.add_argument("--cols", type=int, required=True)
    sp.add_argument("--seed", type=_seed, help="drawn from entropy and printed when absent")
    sp.add_argument("--target-fill", type=_fraction)
    sp.add_argument("--tries", type=int, metavar="T")
    sp.add_argument("--probe-time-limit", type=_positive_float, metavar="SECONDS")
    sp.add_argument("--out", metavar="DIR")
    sp.add_argument("--name", help="file stem for --out (default derived from size and seed)")
    sp.add_argument("--json", action="store_true")

    for name, help_text, func in (("export", "write the model in LP format", cmd_export),
                                  ("stats", "print variable and constraint counts", cmd_stats)):
        sp = add(name, help_text, func)
        sp.add_argument("puzzle")
        sp.add_argument("--tight-big-m", action="store_true")
        sp.add_argument("--full-index-sets", action="store_true",
                        help="keep in-path flow variables and board-wide shifts")
        if name == "export":
            sp.add_argument("--out", metavar="PATH")
        else:
            sp.add_argument("--convention", choices=("algebraic", "structural"), default="structural")
            sp.add_argument("--json", action="store_true")

    sp = add("bench", "solve every *.puzzle file of a directory", cmd_bench)
    sp.add_argument("dir")
    sp.add_argument("--time-limit", type=_positive_float, metavar="SECONDS")
    sp.add_argument("--jobs", type=_positive_int, default=1)
    sp.add_argument("--csv", required=True, metavar="OUT.csv")
    sp.add_argument("--table", metavar="OUT.md")
    sp.add_argument("--json", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate":
        if args.rows < 2 or args.cols < 2:
            parser.error("--rows and --cols must be at least 2")
        if args.tries is not None and args.tries < 0:
            parser.error("--tries must be non-negative")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"evolomino: {exc}", file=sys.stderr)
        return exc.code
