"""Board representation, puzzle/solution file I/O and the derived cell sets.

Coordinates are 1-indexed ``(row, col)`` pairs with row 1 at the top of the
board.  Everything in this module is immutable and side-effect free.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

HEADER = "evolomino v1"

ORTHOGONAL = ((-1, 0), (1, 0), (0, -1), (0, 1))
_FORBIDDEN_SHIFTS = frozenset({(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)})


class Coord(NamedTuple):
    row: int
    col: int

    def __add__(self, other):  # type: ignore[override]
        return Coord(self.row + other[0], self.col + other[1])

    def __str__(self) -> str:
        return f"{self.row},{self.col}"


class Translation(NamedTuple):
    drow: int
    dcol: int

    @property
    def admissible(self) -> bool:
        return (self.drow, self.dcol) not in _FORBIDDEN_SHIFTS


class CellState(enum.Enum):
    EMPTY = "."
    SHADED = "#"
    GIVEN = "O"


class PuzzleFormatError(ValueError):
    """Raised for malformed puzzle or solution files."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class Arrow:
    id: int
    path: tuple[Coord, ...]

    def __len__(self) -> int:
        return len(self.path)

    @property
    def tail(self) -> Coord:
        return self.path[0]

    @property
    def head(self) -> Coord:
        return self.path[-1]

    def index(self, cell: Coord) -> int:
        try:
            return self.path.index(cell)
        except ValueError:
            raise ValueError(f"cell {cell} is not on arrow {self.id}") from None


@dataclass(frozen=True)
class Puzzle:
    rows: int
    cols: int
    cells: tuple[tuple[CellState, ...], ...]
    arrows: tuple[Arrow, ...] = ()

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("board dimensions must be positive")
        if len(self.cells) != self.rows or any(len(r) != self.cols for r in self.cells):
            raise ValueError("cell grid does not match board dimensions")
        seen: dict[Coord, int] = {}
        for arrow in self.arrows:
            problem = arrow_problem(self, arrow.path, seen)
            if problem:
                raise ValueError(f"arrow {arrow.id}: {problem}")
            for c in arrow.path:
                seen[c] = arrow.id

    @classmethod
    def empty(cls, rows: int, cols: int, arrows: Iterable[Iterable[tuple[int, int]]] = ()) -> "Puzzle":
        cells = tuple((CellState.EMPTY,) * cols for _ in range(rows))
        return cls(rows, cols, cells, tuple(
            Arrow(k, tuple(Coord(*c) for c in path)) for k, path in enumerate(arrows)))

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def state(self, c: Coord) -> CellState:
        return self.cells[c[0] - 1][c[1] - 1]

    def on_board(self, c: tuple[int, int]) -> bool:
        return 1 <= c[0] <= self.rows and 1 <= c[1] <= self.cols

    def all_cells(self) -> Iterator[Coord]:
        for r in range(1, self.rows + 1):
            for c in range(1, self.cols + 1):
                yield Coord(r, c)

    def index(self, c: tuple[int, int]) -> int:
        """Single 1-based cell index, row-major."""
        return (c[0] - 1) * self.cols + c[1]

    def cells_in(self, state: CellState) -> list[Coord]:
        return [c for c in self.all_cells() if self.state(c) is state]

    def arrow_of(self) -> dict[Coord, int]:
        """Map every on-arrow cell to the id of its arrow."""
        return {c: a.id for a in self.arrows for c in a.path}

    def with_state(self, c: Coord, state: CellState) -> "Puzzle":
        grid = [list(r) for r in self.cells]
        grid[c[0] - 1][c[1] - 1] = state
        return Puzzle(self.rows, self.cols, tuple(tuple(r) for r in grid), self.arrows)


@dataclass(frozen=True)
class SolutionGrid:
    square: tuple[tuple[bool, ...], ...]

    @classmethod
    def from_cells(cls, rows: int, cols: int, squares: Iterable[tuple[int, int]]) -> "SolutionGrid":
        on = set(map(tuple, squares))
        return cls(tuple(tuple((r, c) in on for c in range(1, cols + 1))
                         for r in range(1, rows + 1)))

    @property
    def rows(self) -> int:
        return len(self.square)

    @property
    def cols(self) -> int:
        return len(self.square[0]) if self.square else 0

    def __getitem__(self, c: tuple[int, int]) -> bool:
        return self.square[c[0] - 1][c[1] - 1]

    def squares(self) -> set[Coord]:
        return {Coord(r + 1, c + 1) for r, row in enumerate(self.square)
                for c, v in enumerate(row) if v}

    def flipped(self, c: tuple[int, int]) -> "SolutionGrid":
        grid = [list(r) for r in self.square]
        grid[c[0] - 1][c[1] - 1] = not grid[c[0] - 1][c[1] - 1]
        return SolutionGrid(tuple(tuple(r) for r in grid))


def arrow_problem(p: Puzzle, path: tuple[Coord, ...], taken: dict[Coord, int]) -> Optional[str]:
    """Return the reason ``path`` is not a legal arrow on ``p``, or None."""
    for c in path:
        if not p.on_board(c):
            return f"cell {c} is off the board"
        if p.state(c) is CellState.SHADED:
            return "arrow over shaded cell"
        if c in taken:
            return "overlapping arrows"
    if len(set(path)) != len(path):
        return "arrow path revisits a cell"
    for u, v in zip(path, path[1:]):
        if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
            return "non-contiguous arrow path"
    if len(path) < 3:
        return "arrow length < 3"
    return None


# -- file formats ------------------------------------------------------------

def _header(lines: list[str], what: str) -> tuple[int, int]:
    if not lines or lines[0].strip() != HEADER:
        raise PuzzleFormatError(1, f"expected '{HEADER}'")
    parts = lines[1].split() if len(lines) > 1 else []
    if len(parts) != 4 or parts[0] != "rows" or parts[2] != "cols":
        raise PuzzleFormatError(2, "expected 'rows <m> cols <n>'")
    try:
        m, n = int(parts[1]), int(parts[3])
    except ValueError:
        raise PuzzleFormatError(2, "board dimensions must be integers") from None
    if m < 1 or n < 1:
        raise PuzzleFormatError(2, "board dimensions must be positive")
    if len(lines) < 3 or lines[2].strip() != "grid:":
        raise PuzzleFormatError(3, "expected 'grid:'")
    if len(lines) < 3 + m:
        raise PuzzleFormatError(len(lines) + 1, f"{what} grid has fewer than {m} rows")
    for k in range(m):
        if len(lines[3 + k]) != n:
            raise PuzzleFormatError(4 + k, f"grid row must have {n} characters")
    return m, n


def parse_puzzle(text: str) -> Puzzle:
    lines = text.splitlines()
    m, n = _header(lines, "puzzle")
    symbols = {s.value: s for s in CellState}
    grid = []
    for k in range(m):
        row = []
        for ch in lines[3 + k]:
            if ch not in symbols:
                raise PuzzleFormatError(4 + k, f"unknown cell symbol {ch!r}")
            row.append(symbols[ch])
        grid.append(tuple(row))
    shell = Puzzle(m, n, tuple(grid))

    arrows: list[Arrow] = []
    taken: dict[Coord, int] = {}
    for lineno, line in enumerate(lines[3 + m:], start=4 + m):
        if not line.strip():
            continue
        if not line.startswith("arrow:"):
            raise PuzzleFormatError(lineno, "expected 'arrow: r,c r,c ...'")
        path = []
        for tok in line[len("arrow:"):].split():
            try:
                r, c = (int(v) for v in tok.split(","))
            except ValueError:
                raise PuzzleFormatError(lineno, f"bad coordinate {tok!r}") from None
            path.append(Coord(r, c))
        problem = arrow_problem(shell, tuple(path), taken)
        if problem:
            raise PuzzleFormatError(lineno, problem)
        arrow = Arrow(len(arrows), tuple(path))
        arrows.append(arrow)
        taken.update((c, arrow.id) for c in path)
    return Puzzle(m, n, tuple(grid), tuple(arrows))


def serialize_puzzle(p: Puzzle) -> str:
    out = [HEADER, f"rows {p.rows} cols {p.cols}", "grid:"]
    out += ["".join(s.value for s in row) for row in p.cells]
    out += ["arrow: " + " ".join(str(c) for c in a.path) for a in p.arrows]
    return "\n".join(out) + "\n"


def parse_solution(text: str) -> SolutionGrid:
    lines = text.splitlines()
    m, _ = _header(lines, "solution")
    rows = []
    for k in range(m):
        line = lines[3 + k]
        if set(line) - set("*.#"):
            raise PuzzleFormatError(4 + k, "solution rows use only '*', '.', '#'")
        rows.append(tuple(ch == "*" for ch in line))
    return SolutionGrid(tuple(rows))


def serialize_solution(s: SolutionGrid, p: Optional[Puzzle] = None) -> str:
    """Solution file text; shaded cells of ``p`` are echoed as ``#``."""
    out = [HEADER, f"rows {s.rows} cols {s.cols}", "grid:"]
    for r, row in enumerate(s.square, start=1):
        chars = []
        for c, v in enumerate(row, start=1):
            if v:
                chars.append("*")
            elif p is not None and p.state(Coord(r, c)) is CellState.SHADED:
                chars.append("#")
            else:
                chars.append(".")
        out.append("".join(chars))
    return "\n".join(out) + "\n"


# -- derived sets --------------------------------------------------------------

def neighbors(p: Puzzle, i: tuple[int, int]) -> set[Coord]:
    return {Coord(i[0] + dr, i[1] + dc) for dr, dc in ORTHOGONAL
            if p.on_board((i[0] + dr, i[1] + dc))}


def region(p: Puzzle, a: Arrow, refine: bool = True) -> set[Coord]:
    """Cells that may belong to a block anchored on arrow ``a``.

    A BFS wave starts from every cell of ``a`` and never enters shaded cells
    or cells of another arrow.  With ``refine`` the result also drops cells
    orthogonally adjacent to a given square lying on another arrow: such a
    square always anchors a foreign block, and blocks may not touch.
    """
    foreign = {c for b in p.arrows if b.id != a.id for c in b.path}
    own = set(a.path)
    seen = set(own)
    queue = deque(a.path)
    while queue:
        cur = queue.popleft()
        for nb in neighbors(p, cur):
            if nb in seen or nb in foreign or p.state(nb) is CellState.SHADED:
                continue
            seen.add(nb)
            queue.append(nb)
    if refine:
        for g in foreign:
            if p.state(g) is CellState.GIVEN:
                seen -= neighbors(p, g) - own
    return seen


def max_blocks(a: Arrow) -> int:
    return (len(a.path) + 1) // 2


def translations_from(p: Puzzle, a: Arrow, i: Coord,
                      cells: Optional[set[Coord]] = None) -> set[Translation]:
    """Admissible shifts carrying cell ``i`` onto another cell of the region.

    ``cells`` lets callers pass a precomputed ``region(p, a)``.
    """
    if cells is None:
        cells = region(p, a)
    out = set()
    for c in cells:
        t = Translation(c[0] - i[0], c[1] - i[1])
        if t.admissible:
            out.add(t)
    return out


def next_on_arrow(a: Arrow, i: Coord) -> Optional[Coord]:
    k = a.index(i)
    return a.path[k + 1] if k + 1 < len(a.path) else None


def preceding_on_arrow(a: Arrow, i: Coord) -> list[Coord]:
    return list(a.path[:a.index(i)])


def translate(cells: Iterable[tuple[int, int]], t: tuple[int, int]) -> set[Coord]:
    return {Coord(c[0] + t[0], c[1] + t[1]) for c in cells}


def components(cells: Iterable[tuple[int, int]]) -> list[set[Coord]]:
    """Orthogonally connected components, ordered by their smallest cell."""
    todo = {Coord(*c) for c in cells}
    out = []
    while todo:
        start = min(todo)
        todo.discard(start)
        comp = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for dr, dc in ORTHOGONAL:
                nb = Coord(cur[0] + dr, cur[1] + dc)
                if nb in todo:
                    todo.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        out.append(comp)
    return out
