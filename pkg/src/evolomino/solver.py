"""Depth-first integer search with bounds propagation over an :class:`IlpModel`.

Every row is normalised to ``sum(c * v) <= rhs`` and its minimum activity is
kept up to date as bounds move, so a row is revisited only when its slack
shrinks.  On top of the linear rows a block-connectivity propagator removes
cells that cannot be joined to any anchor.  Only binary variables are
branched on; sizes, supplies and flows are filled in once every binary is
fixed.
"""

from __future__ import annotations

import enum
import logging
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernel
from ._kernel import KernelState
from .grid import Coord, SolutionGrid
from .model import (BINARY_FAMILIES, Family, IlpModel, Sense, add_exclusion, complete_assignment,
                    violated)

log = logging.getLogger(__name__)

# Block activation and membership first: fixing squares before deciding who
# owns them leaves the linear rows almost nothing to propagate.
DEFAULT_ORDER = ("b", "y", "x", "t")

# Flow rows only certify connectivity, which the block propagator enforces
# directly; they are checked on the completed assignment instead.
FLOW_TAGS = frozenset({"C12", "C13", "C14", "C14b", "C15", "C16"})


class Status(enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True)
class Limits:
    time: Optional[float] = None
    nodes: Optional[int] = None


@dataclass
class SearchStats:
    nodes: int = 0
    failures: int = 0
    propagations: int = 0
    wall_time: float = 0.0


@dataclass
class SolveOutcome:
    status: Status
    solution: Optional[SolutionGrid] = None
    values: Optional[list[int]] = field(default=None, repr=False)
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


class Search:
    """Mutable search state for one model.  Not shareable between threads."""

    # nodes between wall-clock checks
    CHUNK = 256

    def __init__(self, m: IlpModel, limits: Limits = Limits(), seed: Optional[int] = None,
                 order: tuple[str, ...] = DEFAULT_ORDER, propagate_flows: bool = False):
        self.model = m
        self.limits = limits
        self.stats = SearchStats()
        nv = len(m.vars)
        lo = np.asarray(m.lower, dtype=np.int64)
        hi = np.asarray(m.upper, dtype=np.int64)

        coefs: list[list[int]] = []
        cols: list[list[int]] = []
        rhs: list[int] = []
        for con in m.constraints:
            if not propagate_flows and con.tag in FLOW_TAGS:
                continue
            cs = [c for c, _ in con.terms]
            js = [j for _, j in con.terms]
            if con.sense is not Sense.GE:
                coefs.append(cs)
                cols.append(js)
                rhs.append(con.rhs)
            if con.sense is not Sense.LE:
                coefs.append([-c for c in cs])
                cols.append(js)
                rhs.append(-con.rhs)
        nr = len(rhs)
        row_ptr = np.zeros(nr + 1, dtype=np.int64)
        row_ptr[1:] = np.cumsum([len(c) for c in cols])
        row_col = np.fromiter((j for js in cols for j in js), dtype=np.int64, count=row_ptr[-1])
        row_coef = np.fromiter((c for cs in coefs for c in cs), dtype=np.int64, count=row_ptr[-1])
        row_id = np.repeat(np.arange(nr, dtype=np.int64), np.diff(row_ptr))

        # rows where a lower-bound rise (pos) or upper-bound drop (neg) eats slack
        def occurrences(mask):
            sel = np.flatnonzero(mask)
            sel = sel[np.argsort(row_col[sel], kind="stable")]
            ptr = np.zeros(nv + 1, dtype=np.int64)
            ptr[1:] = np.cumsum(np.bincount(row_col[sel], minlength=nv))
            return ptr, row_id[sel].copy(), row_coef[sel].copy()

        pos_ptr, pos_row, pos_coef = occurrences(row_coef > 0)
        neg_ptr, neg_row, neg_coef = occurrences(row_coef < 0)
        self.occurrences = np.diff(pos_ptr) + np.diff(neg_ptr)

        term_min = np.where(row_coef > 0, row_coef * lo[row_col], row_coef * hi[row_col])
        minact = np.zeros(nr, dtype=np.int64)
        np.add.at(minact, row_id, term_min)
        # no single term can move by more than this, so slack above it is inert
        maxrange = np.zeros(nr, dtype=np.int64)
        np.maximum.at(maxrange, row_id, np.abs(row_coef) * (hi[row_col] - lo[row_col]))

        touched = np.zeros(nv, dtype=bool)
        touched[row_col] = True
        trail_cap = int(np.sum((hi - lo)[touched])) + 1

        blocks = self._setup_blocks()
        self.order = self._setup_branching(seed, order)
        prefer = np.zeros(nv, dtype=np.int64)
        for j in self.order:
            prefer[j] = m.vars[j].family is not Family.CELL_X
        depth = len(self.order) + 1
        width = max((len(cells) for _, _, cells, _, _, _ in self.blocks), default=0) + 1

        def zeros(n):
            return np.zeros(n, dtype=np.int64)

        self.state = KernelState(
            lo=lo, hi=hi, minact=minact, maxrange=maxrange,
            rhs=np.asarray(rhs, dtype=np.int64),
            row_ptr=row_ptr, row_col=row_col, row_coef=row_coef,
            pos_ptr=pos_ptr, pos_row=pos_row, pos_coef=pos_coef,
            neg_ptr=neg_ptr, neg_row=neg_row, neg_coef=neg_coef,
            queue=np.arange(nr, dtype=np.int64), queued=np.ones(nr, dtype=np.int64),
            dirty=np.arange(len(self.blocks), dtype=np.int64),
            dirty_flag=np.ones(len(self.blocks), dtype=np.int64),
            tr_j=zeros(trail_cap), tr_lo=zeros(trail_cap), tr_hi=zeros(trail_cap),
            **blocks,
            comp=zeros(width), memb=zeros(width), cstart=zeros(width + 1), creq=zeros(width),
            cnt=zeros(width), stamp=zeros(width),
            order=np.asarray(self.order, dtype=np.int64), prefer=prefer,
            st_p=zeros(depth), st_j=zeros(depth), st_alt=zeros(depth), st_mark=zeros(depth),
            ctr=zeros(8),
        )
        self.state.ctr[_kernel.QLEN] = nr
        self.state.ctr[_kernel.DLEN] = len(self.blocks)

    @property
    def lo(self) -> np.ndarray:
        return self.state.lo

    @property
    def hi(self) -> np.ndarray:
        return self.state.hi

    # -- structure -------------------------------------------------------------

    def _setup_blocks(self) -> dict:
        m = self.model
        block_of = np.full(len(m.vars), -1, dtype=np.int64)
        self.blocks = []
        blk_ptr, blk_y, blk_onpath, adj_ptr, adj_idx = [0], [], [], [0], []
        for ad in m.arrows:
            path = set(ad.path)
            cells = sorted(ad.cells)
            local = {c: n for n, c in enumerate(cells)}
            adj = []
            for c in cells:
                adj.append([local[nb] for nb in (Coord(c[0] - 1, c[1]), Coord(c[0] + 1, c[1]),
                                                 Coord(c[0], c[1] - 1), Coord(c[0], c[1] + 1))
                            if nb in local])
            on_path = [c in path for c in cells]
            for k in range(1, ad.blocks + 1):
                ys = [m.var(Family.BLOCK_Y, ad.id, k, c) for c in cells]
                bid = len(self.blocks)
                block_of[ys] = bid
                self.blocks.append((ad.id, k, cells, ys, adj, on_path))
                blk_y += ys
                blk_onpath += on_path
                blk_ptr.append(len(blk_y))
                for nbs in adj:
                    adj_idx += nbs
                    adj_ptr.append(len(adj_idx))

        def arr(xs):
            return np.asarray(xs, dtype=np.int64)

        return dict(block_of=block_of, blk_ptr=arr(blk_ptr), blk_y=arr(blk_y),
                    blk_onpath=arr(blk_onpath), adj_ptr=arr(adj_ptr), adj_idx=arr(adj_idx))

    def _setup_branching(self, seed: Optional[int], families: tuple[str, ...]) -> list[int]:
        m = self.model
        rank = {Family(f): n for n, f in enumerate(families)}
        if sorted(rank, key=lambda f: f.value) != sorted(BINARY_FAMILIES, key=lambda f: f.value):
            raise ValueError(f"branching order must list each of x, y, b, t once: {families}")
        occ = self.occurrences
        binaries = [j for j, v in enumerate(m.vars) if v.binary]
        jitter = {}
        if seed is not None:
            rng = random.Random(seed)
            jitter = {j: rng.random() for j in binaries}

        def key(j):
            v = m.vars[j]
            ix = v.index
            if v.family is Family.CELL_X:
                lex = (0, 0, *ix[0])
            elif v.family is Family.TRANS_T:
                lex = (ix[0], ix[1], *ix[2])
            elif len(ix) == 3:
                lex = (ix[0], ix[1], *ix[2])
            else:
                lex = (ix[0], ix[1])
            return (rank[v.family], -int(occ[j]), jitter.get(j, 0.0), lex)

        return sorted(binaries, key=key)

    # -- search ------------------------------------------------------------------

    def _complete(self) -> Optional[list[int]]:
        m = self.model
        lo = self.lo.tolist()
        blocks, anchors, shifts = {}, {}, {}
        for a, k, cells, ys, _, on_path in self.blocks:
            if not lo[m.var(Family.ACT_B, a, k)]:
                continue
            members = {cells[s] for s in range(len(cells)) if lo[ys[s]]}
            blocks[a, k] = members
            anchor = [cells[s] for s in range(len(cells)) if on_path[s] and lo[ys[s]]]
            if len(anchor) != 1:
                return None
            anchors[a, k] = anchor[0]
        for j, v in enumerate(m.vars):
            if v.family is Family.TRANS_T and lo[j]:
                shifts[v.index[0], v.index[1]] = v.index[2]
        values = complete_assignment(m, blocks, anchors, shifts)
        if values is None:
            return None
        # binaries outside any block (x on empty cells, unused t) come from the bounds
        for j, v in enumerate(m.vars):
            if v.binary:
                values[j] = lo[j]
        return values

    def _sync_stats(self) -> None:
        ctr = self.state.ctr
        self.stats.nodes = int(ctr[_kernel.NODES])
        self.stats.failures = int(ctr[_kernel.FAILS])
        self.stats.propagations = int(ctr[_kernel.PROPS])

    def run(self) -> SolveOutcome:
        start = time.perf_counter()
        values, timed_out = self._search(start)
        self._sync_stats()
        self.stats.wall_time = time.perf_counter() - start
        if timed_out:
            return SolveOutcome(Status.TIMED_OUT, stats=self.stats)
        if values is None:
            return SolveOutcome(Status.INFEASIBLE, stats=self.stats)
        p = self.model.puzzle
        grid = SolutionGrid.from_cells(p.rows, p.cols,
                                       [c for c in p.all_cells() if values[self.model.x(c)]])
        return SolveOutcome(Status.FEASIBLE, grid, values, self.stats)

    def _search(self, start: float) -> tuple[Optional[list[int]], bool]:
        S, lim = self.state, self.limits
        if not _kernel.propagate(S):
            return None, False
        failed = False
        while True:
            budget = self.CHUNK
            if lim.nodes is not None:
                budget = min(budget, lim.nodes - int(S.ctr[_kernel.NODES]))
            code = _kernel.search(S, failed, budget)
            if code == _kernel.EXHAUSTED:
                return None, False
            if code == _kernel.LEAF:
                values = self._complete()
                if values is not None:
                    bad = violated(self.model, values)
                    if not bad:
                        return values, False
                    log.warning("completion broke %d rows, e.g. %s", len(bad), bad[0].tag)
                failed = True
                continue
            failed = False
            if lim.nodes is not None and S.ctr[_kernel.NODES] >= lim.nodes:
                return None, True
            if lim.time is not None and time.perf_counter() - start > lim.time:
                return None, True


def solve(m: IlpModel, limits: Limits = Limits(), seed: Optional[int] = None,
          order: tuple[str, ...] = DEFAULT_ORDER) -> SolveOutcome:
    return Search(m, limits, seed, order).run()


@dataclass
class Enumeration:
    solutions: list[SolutionGrid]
    complete: bool
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.solutions)


def enumerate_solutions(m: IlpModel, cap: int, limits: Limits = Limits()) -> Enumeration:
    """Solve, cut off the solution, repeat.

    ``complete`` is True when the search proved there are no further
    solutions; ``truncated`` marks a timeout part-way through.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    found: list[SolutionGrid] = []
    while len(found) < cap:
        out = solve(m, limits)
        if out.status is Status.TIMED_OUT:
            return Enumeration(found, False, True)
        if out.status is Status.INFEASIBLE:
            return Enumeration(found, True)
        found.append(out.solution)
        m = add_exclusion(m, out.solution)
    return Enumeration(found, False)


class Uniqueness(enum.Enum):
    UNIQUE = "unique"
    NOT_UNIQUE = "not unique"
    UNKNOWN = "unknown"

    def __bool__(self) -> bool:
        return self is Uniqueness.UNIQUE


def is_unique(m: IlpModel, s: SolutionGrid, limits: Limits = Limits()) -> Uniqueness:
    """Whether ``s`` is the only solution; UNKNOWN if the search timed out.

    The result is truthy only for a proven unique solution.
    """
    out = solve(add_exclusion(m, s), limits)
    if out.status is Status.INFEASIBLE:
        return Uniqueness.UNIQUE
    if out.status is Status.FEASIBLE:
        return Uniqueness.NOT_UNIQUE
    return Uniqueness.UNKNOWN


def block_cells(values: list[int], m: IlpModel) -> dict[tuple[int, int], set[Coord]]:
    """Group the y variables set in ``values`` by block."""
    out: dict[tuple[int, int], set[Coord]] = defaultdict(set)
    for j, v in enumerate(m.vars):
        if v.family is Family.BLOCK_Y and values[j]:
            a, k, c = v.index
            out[a, k].add(c)
    return dict(out)
