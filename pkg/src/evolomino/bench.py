"""Batch solving of puzzle directories and runtime summaries.

Quartiles are Tukey hinges: the medians of the lower and upper halves of
the sorted sample, the median itself left out of both halves when the
count is odd.  Outliers lie strictly outside ``[Q1 - 1.5 IQR, Q3 + 1.5 IQR]``.
"""

from __future__ import annotations

import csv
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from functools import cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .grid import Puzzle, PuzzleFormatError, parse_puzzle
from .model import build_model, stats
from .solver import Limits, Search

CSV_COLUMNS = ("id", "size", "vars", "constraints", "status", "ms", "nodes", "build_ms")
COUNT_CONVENTION = "structural"
ERROR = "Error"
FENCE_FACTOR = 1.5


@dataclass(frozen=True)
class BenchRecord:
    id: str
    size: str
    vars: int
    constraints: int
    status: str
    ms: float
    nodes: int
    build_ms: float = 0.0


@dataclass(frozen=True)
class SizeSummary:
    size: str
    count: int
    vars: int
    constraints: int
    q1: float
    median: float
    q3: float
    outliers: tuple[str, ...] = field(default=())

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def instance_files(directory: Path) -> list[Path]:
    return sorted(Path(directory).glob("*.puzzle"), key=lambda f: f.stem)


@cache
def _warm_up() -> None:
    """Load the compiled search kernel so the first timed solve does not pay for it."""
    Search(build_model(Puzzle.empty(2, 3, [[(1, 1), (1, 2), (1, 3)]]))).run()


def run_one(path: Path, limits: Limits = Limits()) -> BenchRecord:
    """Solve one file; unreadable or malformed files give an Error record."""
    ident = Path(path).stem
    try:
        p = parse_puzzle(Path(path).read_text())
    except (OSError, UnicodeDecodeError, PuzzleFormatError):
        return BenchRecord(ident, "?", 0, 0, ERROR, 0.0, 0)
    _warm_up()
    t0 = time.perf_counter()
    m = build_model(p)
    counts = stats(m, COUNT_CONVENTION)
    search = Search(m, limits)
    build_ms = (time.perf_counter() - t0) * 1000
    # only the search itself is timed
    t1 = time.perf_counter()
    out = search.run()
    ms = (time.perf_counter() - t1) * 1000
    return BenchRecord(ident, f"{p.rows}x{p.cols}", counts.total_variables,
                       counts.total_constraints, out.status.value, ms, out.stats.nodes, build_ms)


def run(directory: Path, limits: Limits = Limits(), jobs: int = 1) -> list[BenchRecord]:
    """One record per ``*.puzzle`` file, ordered by instance id."""
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    files = instance_files(directory)
    if jobs == 1 or len(files) < 2:
        records = [run_one(f, limits) for f in files]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_one, files, [limits] * len(files)))
    return sorted(records, key=lambda r: r.id)


def tukey_hinges(values: Sequence[float]) -> tuple[float, float, float]:
    if not values:
        raise ValueError("no values")
    xs = sorted(values)
    half = len(xs) // 2
    med = statistics.median(xs)
    if half == 0:
        return med, med, med
    return statistics.median(xs[:half]), med, statistics.median(xs[len(xs) - half:])


def fences(q1: float, q3: float) -> tuple[float, float]:
    iqr = q3 - q1
    return q1 - FENCE_FACTOR * iqr, q3 + FENCE_FACTOR * iqr


def _size_key(label: str):
    try:
        r, c = label.split("x")
        return (0, int(r) * int(c), int(r), int(c))
    except ValueError:
        return (1, 0, 0, 0)


def summarize(records: Iterable[BenchRecord]) -> list[SizeSummary]:
    """Per-size quartiles and outliers of the solve times; Error records are skipped."""
    groups: dict[str, list[BenchRecord]] = {}
    for r in records:
        if r.status != ERROR:
            groups.setdefault(r.size, []).append(r)
    out = []
    for size in sorted(groups, key=_size_key):
        recs = sorted(groups[size], key=lambda r: r.id)
        q1, med, q3 = tukey_hinges([r.ms for r in recs])
        lo, hi = fences(q1, q3)
        outliers = tuple(r.id for r in recs if r.ms < lo or r.ms > hi)
        out.append(SizeSummary(size, len(recs), round(statistics.median(r.vars for r in recs)),
                               round(statistics.median(r.constraints for r in recs)),
                               q1, med, q3, outliers))
    return out


def write_csv(records: Iterable[BenchRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])


def read_csv(path: Path) -> list[BenchRecord]:
    types = {f.name: f.type for f in fields(BenchRecord)}
    casts = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [BenchRecord(**{k: casts[types[k]](v) for k, v in row.items()}) for row in rows]


def markdown_table(summaries: Sequence[SizeSummary], note: Optional[str] = None) -> str:
    lines = ["Solve time in ms; quartiles are Tukey hinges, outliers lie outside "
             "Q1 - 1.5 IQR and Q3 + 1.5 IQR.", ""]
    if note:
        lines[1:1] = [note]
    lines += ["| size | vars | constraints | Q1 | median | Q3 | outliers |",
              "|---|---:|---:|---:|---:|---:|---|"]
    for s in summaries:
        lines.append(f"| {s.size} | {s.vars} | {s.constraints} | {s.q1:.1f} | {s.median:.1f} "
                     f"| {s.q3:.1f} | {', '.join(s.outliers) or '-'} |")
    return "\n".join(lines) + "\n"
