"""Random puzzle generation with a uniqueness-preserving clue carve.

A board is filled arrow by arrow: each arrow is a biased random walk, and
its blocks are placed by a randomized backtracking search.  Once the board
is dense enough every free cell is shaded and every square is given; boards
whose solution is still ambiguous after that are rebuilt.  Clues are then
removed greedily in random order, keeping each removal only if the solver
proves the solution is still unique.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import (ORTHOGONAL, Arrow, CellState, Coord, Puzzle, SolutionGrid)
from .model import build_model
from .solver import Limits, Uniqueness, is_unique


class GenerationFailed(RuntimeError):
    """No arrow could be committed within the try budget."""


@dataclass(frozen=True)
class GenParams:
    target_fill: float = 0.6
    max_tries: int = 100
    min_arrow: int = 3
    p_stop_arrow: float = 0.3
    min_blocks: int = 2
    p_stop_blocks: float = 0.5
    straight_bias: float = 2.0
    seed: int = 0
    # caps the CanPlace checks of one PlaceBlocks search
    placement_budget: int = 5000
    # boards built before giving up when the fully clued board is ambiguous
    max_boards: int = 25
    probe_time_limit: Optional[float] = 60.0

    def __post_init__(self):
        if not 0 <= self.target_fill <= 1:
            raise ValueError("target_fill must lie in [0, 1]")
        for name in ("p_stop_arrow", "p_stop_blocks"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.min_arrow < 3:
            raise ValueError("min_arrow must be at least 3")
        if self.min_blocks < 2:
            raise ValueError("min_blocks must be at least 2")
        if self.straight_bias < 1:
            raise ValueError("straight_bias must be at least 1")
        if self.max_tries < 0:
            raise ValueError("max_tries must be non-negative")
        if self.max_boards < 1:
            raise ValueError("max_boards must be at least 1")

    def as_dict(self) -> dict:
        return asdict(self)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def bernoulli(rng: np.random.Generator, p: float) -> bool:
    return bool(rng.random() < p)


class GenBoard:
    """Working grid with an undo journal.

    ``arrow[r][c]`` holds the id of the arrow through a cell (or -1) and
    ``block[r][c]`` the ``(arrow id, ordinal)`` of the square drawn there.
    Rows and columns are 0-based internally.
    """

    def __init__(self, rows: int, cols: int):
        self.rows, self.cols = rows, cols
        self.arrow = [[-1] * cols for _ in range(rows)]
        self.block: list[list[Optional[tuple[int, int]]]] = [[None] * cols for _ in range(rows)]
        self.paths: list[list[Coord]] = []
        self.blocks: list[list[frozenset[Coord]]] = []
        self.journal: list[tuple] = []
        self.arrow_marks: list[int] = []

    # journaled primitives
    def set_arrow(self, c: Coord, aid: int) -> None:
        self.journal.append(("arrow", c, self.arrow[c[0]][c[1]]))
        self.arrow[c[0]][c[1]] = aid

    def set_block(self, c: Coord, owner: Optional[tuple[int, int]]) -> None:
        self.journal.append(("block", c, self.block[c[0]][c[1]]))
        self.block[c[0]][c[1]] = owner

    def rollback(self, mark: int) -> None:
        while len(self.journal) > mark:
            kind, c, old = self.journal.pop()
            if kind == "arrow":
                self.arrow[c[0]][c[1]] = old
            elif kind == "block":
                self.block[c[0]][c[1]] = old
            elif kind == "commit":
                self.paths.pop()
                self.blocks.pop()

    def commit(self, path: list[Coord], blocks: list[frozenset[Coord]]) -> None:
        self.journal.append(("commit", None, None))
        self.paths.append(list(path))
        self.blocks.append(list(blocks))

    def undo_last_arrow(self) -> None:
        if self.arrow_marks:
            self.rollback(self.arrow_marks.pop())

    def reset(self) -> None:
        self.rollback(0)
        self.arrow_marks.clear()

    def snapshot(self) -> tuple:
        return (tuple(map(tuple, self.arrow)), tuple(map(tuple, self.block)),
                tuple(map(tuple, self.paths)), tuple(tuple(b) for b in self.blocks))

    # queries
    def on_board(self, c: tuple[int, int]) -> bool:
        return 0 <= c[0] < self.rows and 0 <= c[1] < self.cols

    def free(self, c: tuple[int, int]) -> bool:
        return self.arrow[c[0]][c[1]] < 0 and self.block[c[0]][c[1]] is None

    def free_cells(self) -> list[Coord]:
        return [Coord(r, c) for r in range(self.rows) for c in range(self.cols)
                if self.free((r, c))]

    def fill(self) -> float:
        used = sum(1 for r in range(self.rows) for c in range(self.cols) if not self.free((r, c)))
        return used / (self.rows * self.cols)

    def squares(self) -> set[Coord]:
        return {Coord(r, c) for r in range(self.rows) for c in range(self.cols)
                if self.block[r][c] is not None}


def _step(c: tuple[int, int], d: tuple[int, int]) -> Coord:
    return Coord(c[0] + d[0], c[1] + d[1])


def _walkable(b: GenBoard, c: Coord, nxt: Coord, aid: int) -> bool:
    """A walk of arrow ``aid`` at ``c`` may step into ``nxt``.

    The arrow may not touch itself except through consecutive cells, which
    keeps every path unambiguous when drawn.
    """
    if not b.on_board(nxt) or not b.free(nxt):
        return False
    for dr, dc in ORTHOGONAL:
        nb = (nxt[0] + dr, nxt[1] + dc)
        if nb != tuple(c) and b.on_board(nb) and b.arrow[nb[0]][nb[1]] == aid:
            return False
    return True


def get_next_dir(c: Coord, d: Optional[tuple[int, int]], b: GenBoard, params: GenParams,
                 rng: np.random.Generator, aid: Optional[int] = None) -> Optional[tuple[int, int]]:
    """Sample the next step of the walk; None means the walk is stuck."""
    if aid is None:
        aid = len(b.paths)
    options, weights = [], []
    for nd in ORTHOGONAL:
        if _walkable(b, c, _step(c, nd), aid):
            options.append(nd)
            weights.append(params.straight_bias if nd == d else 1.0)
    if not options:
        return None
    w = np.asarray(weights)
    return options[int(rng.choice(len(options), p=w / w.sum()))]


def weighted_shuffle(items: Sequence, weights: Sequence[float], rng: np.random.Generator) -> list:
    """Weighted random permutation (Efraimidis-Spirakis keys ``u ** (1 / w)``).

    Keys are compared in log space, which preserves their order.
    """
    if len(items) != len(weights):
        raise ValueError("items and weights differ in length")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    u = 1.0 - rng.random(len(items))  # (0, 1]
    keys = np.log(u) / np.asarray(weights, dtype=float)
    order = sorted(range(len(items)), key=lambda k: -keys[k])
    return [items[k] for k in order]


def get_evolutions(block, rows: Optional[int] = None, cols: Optional[int] = None) -> list[frozenset]:
    """Every way to add one orthogonal neighbour to ``block``.

    With ``rows``/``cols`` (0-based board) candidates are clipped to the board.
    """
    cells = frozenset(Coord(*c) for c in block)
    seen = set()
    out = []
    for c in sorted(cells):
        for dr, dc in ORTHOGONAL:
            nb = Coord(c[0] + dr, c[1] + dc)
            if nb in cells or nb in seen:
                continue
            if rows is not None and not (0 <= nb[0] < rows and 0 <= nb[1] < cols):
                continue
            seen.add(nb)
            out.append(cells | {nb})
    return out


def _random_polyomino(size: int, rng: np.random.Generator) -> frozenset[Coord]:
    shape = frozenset({Coord(0, 0)})
    while len(shape) < size:
        options = get_evolutions(shape)
        shape = options[int(rng.integers(len(options)))]
    return shape


def valid_indices(path_len: int, idx: int, placed: int, min_blocks: int) -> list[int]:
    """Anchor positions for the next block along a path.

    Positions increase, skip the cell right after the previous anchor, and
    leave room for the blocks still needed to reach ``min_blocks``.
    """
    start = 0 if placed == 0 else idx + 2
    remaining = max(0, min_blocks - placed - 1)
    return [j for j in range(start, path_len) if path_len - 1 - j >= 2 * remaining]


def can_place(b: GenBoard, cells: frozenset[Coord], anchor: Coord) -> bool:
    for c in cells:
        if not b.on_board(c) or b.block[c[0]][c[1]] is not None:
            return False
        if c != anchor and b.arrow[c[0]][c[1]] >= 0:
            return False
        for dr, dc in ORTHOGONAL:
            nb = (c[0] + dr, c[1] + dc)
            if nb not in cells and b.on_board(nb) and b.block[nb[0]][nb[1]] is not None:
                return False
    return True


class _Budget:
    def __init__(self, n: int):
        self.left = n


def place_blocks(b: GenBoard, path: list[Coord], blocks: list[frozenset[Coord]], idx: int,
                 params: GenParams, rng: np.random.Generator, aid: int,
                 budget: Optional[_Budget] = None) -> list[frozenset[Coord]]:
    """Randomized backtracking placement of an arrow's blocks.

    Returns the block list or an empty list; the board is left unchanged on
    failure and holds the placed squares on success.
    """
    if budget is None:
        budget = _Budget(params.placement_budget)
    if len(blocks) >= params.min_blocks and bernoulli(rng, params.p_stop_blocks):
        return blocks
    cands = valid_indices(len(path), idx, len(blocks), params.min_blocks)
    if not cands:
        return []
    for j in weighted_shuffle(cands, [len(path) - j for j in cands], rng):
        if blocks:
            shapes = get_evolutions(blocks[-1])
        else:
            size = 1
            while size < b.rows * b.cols and not bernoulli(rng, params.p_stop_blocks):
                size += 1
            shapes = [_random_polyomino(size, rng)]
        rng.shuffle(shapes)
        target = path[j]
        for shape in shapes:
            anchors = sorted(shape)
            rng.shuffle(anchors)
            for anchor in anchors:
                if budget.left <= 0:
                    return []
                budget.left -= 1
                dr, dc = target[0] - anchor[0], target[1] - anchor[1]
                placed = frozenset(Coord(c[0] + dr, c[1] + dc) for c in shape)
                if not can_place(b, placed, target):
                    continue
                mark = len(b.journal)
                for c in placed:
                    b.set_block(c, (aid, len(blocks) + 1))
                res = place_blocks(b, path, blocks + [placed], j, params, rng, aid, budget)
                if res:
                    return res
                b.rollback(mark)
    return []


def try_add_arrow(b: GenBoard, params: GenParams, rng: np.random.Generator) -> bool:
    free = b.free_cells()
    if not free:
        return False
    aid = len(b.paths)
    mark = len(b.journal)
    c = free[int(rng.integers(len(free)))]
    b.set_arrow(c, aid)
    path = [c]
    d = get_next_dir(c, None, b, params, rng, aid)
    while d is not None:
        c = _step(c, d)
        b.set_arrow(c, aid)
        path.append(c)
        d = get_next_dir(c, d, b, params, rng, aid)
        if d is None or bernoulli(rng, params.p_stop_arrow):
            break
    if len(path) < params.min_arrow:
        b.rollback(mark)
        return False
    blocks = place_blocks(b, path, [], 0, params, rng, aid)
    if not blocks:
        b.rollback(mark)
        return False
    b.commit(path, blocks)
    b.arrow_marks.append(mark)
    return True


@dataclass
class CarveReport:
    puzzle: Puzzle
    solution: SolutionGrid
    probes: int = 0
    timeouts: int = 0
    order: list[Coord] = field(default_factory=list)


def board_solution(b: GenBoard) -> tuple[Puzzle, SolutionGrid]:
    """Fully clued puzzle (free cells shaded, squares given) and its solution."""
    squares = b.squares()
    grid = []
    for r in range(b.rows):
        row = []
        for c in range(b.cols):
            if (r, c) in squares:
                row.append(CellState.GIVEN)
            elif b.arrow[r][c] >= 0:
                row.append(CellState.EMPTY)
            else:
                row.append(CellState.SHADED)
        grid.append(tuple(row))
    arrows = tuple(Arrow(k, tuple(Coord(r + 1, c + 1) for r, c in path))
                   for k, path in enumerate(b.paths))
    p = Puzzle(b.rows, b.cols, tuple(grid), arrows)
    return p, SolutionGrid.from_cells(b.rows, b.cols, [(r + 1, c + 1) for r, c in squares])


def carve_to_unique(b: GenBoard, rng: np.random.Generator,
                    limits: Limits = Limits()) -> CarveReport:
    p, sol = board_solution(b)
    return carve(p, sol, rng, limits)


def carve(p: Puzzle, sol: SolutionGrid, rng: np.random.Generator,
          limits: Limits = Limits()) -> CarveReport:
    """Greedily blank clues of ``p`` while ``sol`` stays the unique solution.

    A probe that times out counts as "another solution may exist" and the
    clue is kept.
    """
    order = list(p.all_cells())
    rng.shuffle(order)
    report = CarveReport(p, sol, order=order)
    for c in order:
        if p.state(c) not in (CellState.SHADED, CellState.GIVEN):
            continue
        trial = p.with_state(c, CellState.EMPTY)
        verdict = is_unique(build_model(trial), sol, limits)
        report.probes += 1
        if verdict is Uniqueness.UNKNOWN:
            report.timeouts += 1
        if verdict is Uniqueness.UNIQUE:
            p = trial
    report.puzzle = p
    return report


@dataclass
class Generated:
    puzzle: Puzzle
    solution: SolutionGrid
    params: GenParams
    fill: float
    tries: int
    probes: int
    timeouts: int
    boards: int = 1

    def metadata(self, name: str = "") -> dict:
        p = self.puzzle
        return {
            "name": name,
            "rows": p.rows,
            "cols": p.cols,
            "seed": self.params.seed,
            "params": self.params.as_dict(),
            "fill": round(self.fill, 6),
            "arrows": len(p.arrows),
            "given_squares": len(p.cells_in(CellState.GIVEN)),
            "shaded_cells": len(p.cells_in(CellState.SHADED)),
            "tries": self.tries,
            "boards": self.boards,
            "probes": self.probes,
            "probe_timeouts": self.timeouts,
        }


def build_board(m: int, n: int, params: GenParams, rng: np.random.Generator) -> tuple[GenBoard, int]:
    """The arrow-and-block filling loop; returns the board and tries spent."""
    b = GenBoard(m, n)
    tries = consecutive = 0
    reset_every = max(1, math.ceil(params.max_tries / 4))
    while b.fill() < params.target_fill and tries < params.max_tries:
        if try_add_arrow(b, params, rng):
            consecutive = 0
            continue
        tries += 1
        consecutive += 1
        if tries >= params.max_tries:
            break  # keep what was built
        if consecutive % reset_every == 0:
            b.reset()
        else:
            b.undo_last_arrow()
    return b, tries


def generate(m: int, n: int, params: GenParams = GenParams()) -> Generated:
    """Build boards until one pins its solution, then carve its clues.

    Arrow cells cannot be shaded, so a fully clued board may still admit
    extra squares on its free arrow cells; such boards are discarded.
    """
    if m < 2 or n < 2:
        raise ValueError("boards must be at least 2x2")
    rng = make_rng(params.seed)
    limits = Limits(time=params.probe_time_limit)
    tries = probes = 0
    for boards in range(1, params.max_boards + 1):
        b, spent = build_board(m, n, params, rng)
        tries += spent
        if not b.paths:
            raise GenerationFailed(f"no arrow placed on {m}x{n} after {tries} tries "
                                   f"(seed {params.seed})")
        p, sol = board_solution(b)
        probes += 1
        if is_unique(build_model(p), sol, limits) is not Uniqueness.UNIQUE:
            continue
        report = carve(p, sol, rng, limits)
        return Generated(report.puzzle, report.solution, params, b.fill(), tries,
                         probes + report.probes, report.timeouts, boards)
    raise GenerationFailed(f"no board with a unique solution on {m}x{n} after "
                           f"{params.max_boards} boards (seed {params.seed})")
