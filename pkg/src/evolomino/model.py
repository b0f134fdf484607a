"""Compile a puzzle into a pure-feasibility integer linear model.

Variable families (one letter each, as in LP exports):

    x  cell holds a square               y  cell belongs to block k of arrow a
    b  block k of arrow a exists         N  size of block k of arrow a
    F  flow supplied at an arrow cell    f  flow between adjacent region cells
    t  block k of arrow a is block k-1 shifted by (dr, dc)

Every row carries a tag naming its constraint family (``C1`` .. ``C20``,
``FIX`` for fixed inputs and ``EXCL`` for exclusion cuts).
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .grid import (CellState, Coord, Puzzle, SolutionGrid, max_blocks, neighbors,
                   region, translate)


class Family(enum.Enum):
    CELL_X = "x"
    BLOCK_Y = "y"
    ACT_B = "b"
    SIZE_N = "N"
    SUPPLY_F = "F"
    FLOW_F = "f"
    TRANS_T = "t"


BINARY_FAMILIES = (Family.CELL_X, Family.BLOCK_Y, Family.ACT_B, Family.TRANS_T)


class Sense(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class VarRef(NamedTuple):
    """A model variable: family plus its index tuple.

    Index layouts: x ``(cell,)``; y and F ``(a, k, cell)``; b and N ``(a, k)``;
    f ``(a, k, from_cell, to_cell)``; t ``(a, k, (dr, dc))``.
    """
    family: Family
    index: tuple

    @property
    def binary(self) -> bool:
        return self.family in BINARY_FAMILIES

    @property
    def name(self) -> str:
        f, ix = self.family, self.index
        if f is Family.CELL_X:
            parts = [*ix[0]]
        elif f in (Family.BLOCK_Y, Family.SUPPLY_F):
            parts = [ix[0], ix[1], *ix[2]]
        elif f in (Family.ACT_B, Family.SIZE_N):
            parts = [ix[0], ix[1]]
        elif f is Family.FLOW_F:
            parts = [ix[0], ix[1], *ix[2], *ix[3]]
        else:
            parts = [ix[0], ix[1], *ix[2]]
        return "_".join([f.value] + [f"m{-v}" if v < 0 else str(v) for v in parts])


class LinearConstraint(NamedTuple):
    """``sum(coef * var) <sense> rhs``; ``terms`` hold variable indices."""
    terms: tuple[tuple[int, int], ...]
    sense: Sense
    rhs: int
    tag: str

    def activity(self, values) -> int:
        return sum(c * values[j] for c, j in self.terms)

    def satisfied(self, values) -> bool:
        act = self.activity(values)
        if self.sense is Sense.LE:
            return act <= self.rhs
        if self.sense is Sense.GE:
            return act >= self.rhs
        return act == self.rhs


@dataclass(frozen=True)
class BuildOptions:
    refine_region: bool = True
    tight_big_m: bool = False
    # Re-adds flow variables between two cells of the same arrow path and
    # instantiates translation variables for every shift of the board.
    full_index_sets: bool = False


@dataclass
class ArrowData:
    """Per-arrow index sets the rows are generated from."""
    id: int
    path: tuple[Coord, ...]
    blocks: int
    cells: frozenset[Coord]
    shifts: tuple[tuple[int, int], ...]


@dataclass
class IlpModel:
    puzzle: Puzzle
    big_m: int
    vars: list[VarRef] = field(default_factory=list)
    lower: list[int] = field(default_factory=list)
    upper: list[int] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    arrows: list[ArrowData] = field(default_factory=list)
    options: BuildOptions = field(default_factory=BuildOptions)
    index: dict[VarRef, int] = field(default_factory=dict, repr=False)

    def add_var(self, family: Family, index: tuple, lo: int = 0, hi: int = 1) -> int:
        ref = VarRef(family, index)
        if ref in self.index:
            raise ValueError(f"duplicate variable {ref.name}")
        self.index[ref] = len(self.vars)
        self.vars.append(ref)
        self.lower.append(lo)
        self.upper.append(hi)
        return self.index[ref]

    def var(self, family: Family, *index) -> int:
        return self.index[VarRef(family, tuple(index))]

    def get(self, family: Family, *index) -> Optional[int]:
        return self.index.get(VarRef(family, tuple(index)))

    def add(self, terms: Iterable[tuple[int, int]], sense: Sense, rhs: int, tag: str) -> None:
        merged: dict[int, int] = {}
        for c, j in terms:
            merged[j] = merged.get(j, 0) + c
        row = tuple((c, j) for j, c in merged.items() if c)
        self.constraints.append(LinearConstraint(row, sense, rhs, tag))

    def x(self, cell: tuple[int, int]) -> int:
        return self.index[VarRef(Family.CELL_X, (Coord(*cell),))]

    def extended(self, rows: Iterable[LinearConstraint]) -> "IlpModel":
        """Shallow copy with extra rows; the variable catalog is shared."""
        return IlpModel(self.puzzle, self.big_m, self.vars, self.lower, self.upper,
                        self.constraints + list(rows), self.arrows, self.options, self.index)


def _shifts(cells: frozenset[Coord]) -> dict[Coord, list[tuple[int, int]]]:
    """Admissible shifts from each cell into the region (see translations_from)."""
    out = {}
    for i in cells:
        out[i] = sorted((c[0] - i[0], c[1] - i[1]) for c in cells
                        if abs(c[0] - i[0]) + abs(c[1] - i[1]) > 1)
    return out


def build_model(p: Puzzle, opts: BuildOptions = BuildOptions()) -> IlpModel:
    M = p.size
    m = IlpModel(p, M, options=opts)
    X = {}
    for c in p.all_cells():
        X[c] = m.add_var(Family.CELL_X, (c,))

    arrows = []
    shift_from = {}
    for a in p.arrows:
        cells = frozenset(region(p, a, refine=opts.refine_region))
        sf = _shifts(cells)
        shift_from[a.id] = sf
        if opts.full_index_sets:
            # one t per board shift for every block, whether or not it fits
            shifts = tuple((dr, dc) for dr in range(1 - p.rows, p.rows)
                           for dc in range(1 - p.cols, p.cols) if abs(dr) + abs(dc) > 1)
        else:
            shifts = tuple(sorted({t for ts in sf.values() for t in ts}))
        arrows.append(ArrowData(a.id, a.path, max_blocks(a), cells, shifts))
    m.arrows = arrows

    def bigm(ad: ArrowData) -> int:
        return len(ad.cells) if opts.tight_big_m else M

    def bigm_size(ad: ArrowData) -> int:
        # block sizes never exceed the region, so |C_a| + 1 switches the rows off
        return len(ad.cells) + 1 if opts.tight_big_m else M

    Y, B, N, F, Fl, T = {}, {}, {}, {}, {}, {}
    for ad in arrows:
        a, P = ad.id, set(ad.path)
        for k in range(1, ad.blocks + 1):
            B[a, k] = m.add_var(Family.ACT_B, (a, k))
            N[a, k] = m.add_var(Family.SIZE_N, (a, k), 0, M)
            for i in sorted(ad.cells):
                Y[a, k, i] = m.add_var(Family.BLOCK_Y, (a, k, i))
            for i in ad.path:
                F[a, k, i] = m.add_var(Family.SUPPLY_F, (a, k, i), 0, M)
            for i in sorted(ad.cells):
                for j in sorted(neighbors(p, i)):
                    if j not in ad.cells:
                        continue
                    if i in P and j in P and not opts.full_index_sets:
                        continue
                    Fl[a, k, i, j] = m.add_var(Family.FLOW_F, (a, k, i, j), 0, M)
            if k >= 2:
                for t in ad.shifts:
                    T[a, k, t] = m.add_var(Family.TRANS_T, (a, k, t))

    LE, EQ, GE = Sense.LE, Sense.EQ, Sense.GE

    # fixed inputs
    for c in p.all_cells():
        st = p.state(c)
        if st is CellState.SHADED:
            m.add([(1, X[c])], EQ, 0, "FIX")
        elif st is CellState.GIVEN:
            m.add([(1, X[c])], EQ, 1, "FIX")
    for ad in arrows:
        for k in (1, 2):
            m.add([(1, B[ad.id, k])], EQ, 1, "FIX")

    owners: dict[Coord, list[tuple[int, int]]] = defaultdict(list)
    for ad in arrows:
        for i in sorted(ad.cells):
            for k in range(1, ad.blocks + 1):
                owners[i].append((ad.id, k))

    # C1: a square belongs to exactly one block
    for c in p.all_cells():
        m.add([(1, Y[a, k, c]) for a, k in owners[c]] + [(-1, X[c])], EQ, 0, "C1")

    # C2: no consecutive squares along an arrow
    for ad in arrows:
        for u, v in zip(ad.path, ad.path[1:]):
            m.add([(1, X[u]), (1, X[v])], LE, 1, "C2")

    for ad in arrows:
        a, K = ad.id, ad.blocks
        cells = sorted(ad.cells)
        for k in range(1, K + 1):
            # C3: inactive blocks are empty
            m.add([(1, Y[a, k, i]) for i in cells] + [(-bigm(ad), B[a, k])], LE, 0, "C3")
        for k in range(1, K + 1):
            # C4: an active block has exactly one square on the arrow
            m.add([(1, Y[a, k, i]) for i in ad.path] + [(-1, B[a, k])], EQ, 0, "C4")
        for k in range(2, K + 1):
            # C5: blocks are activated in order
            m.add([(1, B[a, k]), (-1, B[a, k - 1])], LE, 0, "C5")
        for k in range(2, K + 1):
            # C6: block k is anchored after block k-1 along the arrow
            for pos, i in enumerate(ad.path):
                if pos == 0:
                    continue
                m.add([(1, Y[a, k, j]) for j in ad.path[:pos]] + [(1, Y[a, k - 1, i])],
                      LE, 1, "C6")

    # C7/C8: adjacent cells never belong to different blocks
    for i in p.all_cells():
        for j in (Coord(i.row, i.col + 1), Coord(i.row + 1, i.col)):
            if not p.on_board(j):
                continue
            for a, k in owners[i]:
                for a2, k2 in owners[j]:
                    if (a, k) != (a2, k2):
                        m.add([(1, Y[a, k, i]), (1, Y[a2, k2, j])], LE, 1,
                              "C7" if j.row == i.row else "C8")

    for ad in arrows:
        a, K = ad.id, ad.blocks
        cells = sorted(ad.cells)
        for k in range(1, K + 1):
            # C9: block size
            m.add([(1, N[a, k])] + [(-1, Y[a, k, i]) for i in cells], EQ, 0, "C9")
        Ms = bigm_size(ad)
        for k in range(2, K + 1):
            # C10/C11: each block is one square larger than the previous one
            m.add([(1, N[a, k]), (-1, N[a, k - 1]), (-Ms, B[a, k])], GE, 1 - Ms, "C10")
            m.add([(1, N[a, k]), (-1, N[a, k - 1]), (Ms, B[a, k])], LE, 1 + Ms, "C11")

    # connectivity flows
    for ad in arrows:
        a, K, P = ad.id, ad.blocks, set(ad.path)
        cells = sorted(ad.cells)
        for k in range(1, K + 1):
            for i in cells:
                terms = []
                for j in sorted(neighbors(p, i)):
                    if i in P and j in P:
                        continue
                    if (a, k, j, i) in Fl:
                        terms.append((1, Fl[a, k, j, i]))
                        terms.append((-1, Fl[a, k, i, j]))
                if i in P:
                    # C13: arrow cells may act as the source
                    m.add(terms + [(-1, Y[a, k, i]), (1, F[a, k, i])], EQ, 0, "C13")
                else:
                    # C12: consumers keep one unit
                    m.add(terms + [(-1, Y[a, k, i])], EQ, 0, "C12")
            # C14: total supply equals the block size
            m.add([(1, F[a, k, i]) for i in ad.path] + [(-1, N[a, k])], EQ, 0, "C14")
            for i in ad.path:
                m.add([(1, F[a, k, i]), (-bigm(ad), Y[a, k, i])], LE, 0, "C14b")
            for i in cells:
                for j in sorted(neighbors(p, i)):
                    key = (a, k, i, j)
                    if key in Fl:
                        m.add([(1, Fl[key]), (-bigm(ad), Y[a, k, i])], LE, 0, "C15")
                        m.add([(1, Fl[key]), (-bigm(ad), Y[a, k, j])], LE, 0, "C16")

    # block evolution
    for ad in arrows:
        a, K = ad.id, ad.blocks
        sf = shift_from[a]
        cells = sorted(ad.cells)
        for k in range(2, K + 1):
            # C18: one translation per active block
            m.add([(1, T[a, k, t]) for t in ad.shifts] + [(-1, B[a, k])], EQ, 0, "C18")
            for i in cells:
                # C19: every square of block k-1 has a translation
                m.add([(1, T[a, k, t]) for t in sf[i]] + [(-1, Y[a, k - 1, i]), (-1, B[a, k])],
                      GE, -1, "C19")
            for i in cells:
                for t in sf[i]:
                    # C20: the chosen translation carries block k-1 into block k
                    j = Coord(i.row + t[0], i.col + t[1])
                    m.add([(1, Y[a, k, j]), (-1, Y[a, k - 1, i]), (-1, T[a, k, t])],
                          GE, -1, "C20")
    return m


def add_exclusion(m: IlpModel, s: SolutionGrid) -> IlpModel:
    """Forbid the square placement ``s``: at least one cell must differ."""
    terms, ones = [], 0
    for c in m.puzzle.all_cells():
        if s[c]:
            terms.append((-1, m.x(c)))
            ones += 1
        else:
            terms.append((1, m.x(c)))
    return m.extended([LinearConstraint(tuple(terms), Sense.GE, 1 - ones, "EXCL")])


# -- LP export ---------------------------------------------------------------------

_LP_SENSE = {Sense.LE: "<=", Sense.EQ: "=", Sense.GE: ">="}
_TERMS_PER_LINE = 8


def _lp_terms(terms, names) -> list[str]:
    out = []
    for n, (c, j) in enumerate(terms):
        sign = "-" if c < 0 else ("+" if n else "")
        mag = "" if abs(c) == 1 else f"{abs(c)} "
        out.append(f"{sign} {mag}{names[j]}".strip())
    return out


def export_lp(m: IlpModel) -> str:
    """The model in CPLEX LP format with a zero objective.

    Rows are named ``<tag>_<n>`` and written in tag order; long rows are
    wrapped onto continuation lines.
    """
    names = [v.name for v in m.vars]
    lines = ["\\ Evolomino feasibility model", "Minimize"]
    if names:
        lines.append(f" obj: 0 {names[0]}")
    else:
        lines.append(" obj:")
    if m.constraints:
        lines.append("Subject To")
        rank = {t: n for n, t in enumerate(TAG_ORDER)}
        rows = sorted(enumerate(m.constraints), key=lambda e: (rank.get(e[1].tag, len(rank)), e[0]))
        seen: Counter = Counter()
        for _, con in rows:
            seen[con.tag] += 1
            terms = _lp_terms(con.terms, names) or [f"0 {names[0]}"]
            chunks = [" ".join(terms[i:i + _TERMS_PER_LINE])
                      for i in range(0, len(terms), _TERMS_PER_LINE)]
            head = f" {con.tag}_{seen[con.tag]}: "
            lines.append(head + chunks[0])
            lines.extend("   " + ch for ch in chunks[1:])
            lines[-1] += f" {_LP_SENSE[con.sense]} {con.rhs}"
    if names:
        bounds = [f" {lo} <= {n} <= {hi}" for n, v, lo, hi in zip(names, m.vars, m.lower, m.upper)
                  if not v.binary or (lo, hi) != (0, 1)]
        if bounds:
            lines.append("Bounds")
            lines.extend(bounds)
        binaries = [n for n, v in zip(names, m.vars) if v.binary]
        generals = [n for n, v in zip(names, m.vars) if not v.binary]
        for title, group in (("Binaries", binaries), ("Generals", generals)):
            if group:
                lines.append(title)
                lines.extend(" " + " ".join(group[i:i + _TERMS_PER_LINE])
                             for i in range(0, len(group), _TERMS_PER_LINE))
    lines.append("End")
    return "\n".join(lines) + "\n"


# -- statistics ------------------------------------------------------------------

TAG_ORDER = ["FIX", "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11",
             "C12", "C13", "C14", "C14b", "C15", "C16", "C17", "C18", "C19", "C20", "EXCL"]


@dataclass(frozen=True)
class ModelStats:
    convention: str
    variables: dict[str, int]
    constraints: dict[str, int]

    @property
    def total_variables(self) -> int:
        return sum(self.variables.values())

    @property
    def total_constraints(self) -> int:
        return sum(self.constraints.values())

    def table(self) -> str:
        lines = [f"{'family':<8}{'vars':>8}{'constraints':>13}"]
        for fam in Family:
            lines.append(f"{fam.value:<8}{self.variables.get(fam.value, 0):>8}{'':>13}")
        for tag in TAG_ORDER:
            if tag in self.constraints:
                lines.append(f"{tag:<8}{'':>8}{self.constraints[tag]:>13}")
        lines.append(f"{'total':<8}{self.total_variables:>8}{self.total_constraints:>13}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"convention": self.convention, "variables": dict(self.variables),
                "constraints": dict(self.constraints),
                "total_variables": self.total_variables,
                "total_constraints": self.total_constraints}


def stats(m: IlpModel, convention: str = "structural") -> ModelStats:
    """Count variables and rows per family.

    ``structural`` counts only emitted rows.  ``algebraic`` additionally counts
    flow non-negativity (C17) and the lower half of the supply bound (C14b)
    as rows, as an algebraic listing of the model would.
    """
    if convention not in ("algebraic", "structural"):
        raise ValueError(f"unknown convention {convention!r}")
    var_counts = Counter(v.family.value for v in m.vars)
    row_counts = Counter(c.tag for c in m.constraints)
    if convention == "algebraic":
        if var_counts["f"]:
            row_counts["C17"] += var_counts["f"]
        if var_counts["F"]:
            row_counts["C14b"] += var_counts["F"]
    variables = {f.value: var_counts.get(f.value, 0) for f in Family if var_counts.get(f.value)}
    constraints = {t: row_counts[t] for t in TAG_ORDER if row_counts.get(t)}
    return ModelStats(convention, variables, constraints)


# -- assignments ---------------------------------------------------------------------

def violated(m: IlpModel, values) -> list[LinearConstraint]:
    """Rows (and bounds, reported as pseudo-rows tagged BOUND) broken by ``values``."""
    bad = [LinearConstraint(((1, j),), Sense.GE, m.lower[j], "BOUND")
           for j in range(len(m.vars)) if not m.lower[j] <= values[j] <= m.upper[j]]
    bad += [c for c in m.constraints if not c.satisfied(values)]
    return bad


def spanning_flows(cells: Iterable[Coord], source: Coord) -> Optional[dict[tuple[Coord, Coord], int]]:
    """Unit-demand flows along a BFS tree of ``cells`` rooted at ``source``.

    Returns None when ``cells`` is not connected.
    """
    cells = set(cells)
    parent = {source: None}
    order = [source]
    for cur in order:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb = Coord(cur[0] + dr, cur[1] + dc)
            if nb in cells and nb not in parent:
                parent[nb] = cur
                order.append(nb)
    if len(order) != len(cells):
        return None
    load = {c: 1 for c in cells}
    flows = {}
    for c in reversed(order[1:]):
        flows[parent[c], c] = load[c]
        load[parent[c]] += load[c]
    return flows


def complete_assignment(m: IlpModel, y_blocks: dict[tuple[int, int], set[Coord]],
                        anchors: dict[tuple[int, int], Coord],
                        shifts: dict[tuple[int, int], tuple[int, int]]) -> Optional[list[int]]:
    """Full assignment from block contents, or None if a block is disconnected.

    ``y_blocks`` maps active ``(a, k)`` to its cells; x follows from y, N from
    the block sizes, F sits on the anchor and f routes unit demands along a
    spanning tree.
    """
    values = [0] * len(m.vars)
    for (a, k), cells in y_blocks.items():
        values[m.var(Family.ACT_B, a, k)] = 1
        values[m.var(Family.SIZE_N, a, k)] = len(cells)
        for c in cells:
            values[m.var(Family.BLOCK_Y, a, k, c)] = 1
            values[m.x(c)] = 1
        anchor = anchors[a, k]
        values[m.var(Family.SUPPLY_F, a, k, anchor)] = len(cells)
        flows = spanning_flows(cells, anchor)
        if flows is None:
            return None
        for (u, v), amount in flows.items():
            j = m.get(Family.FLOW_F, a, k, u, v)
            if j is None:
                return None
            values[j] = amount
        if k >= 2:
            t = shifts.get((a, k))
            if t is None:
                return None
            j = m.get(Family.TRANS_T, a, k, t)
            if j is None:
                return None
            values[j] = 1
    return values


def assignment_for(m: IlpModel, s: SolutionGrid) -> Optional[list[int]]:
    """Lift a rule-valid square grid to a full model assignment.

    Returns None when the grid cannot be expressed in the model at all (for
    example a block reaching outside its arrow's region).
    """
    from .rules import extract_blocks

    blocks, problems = extract_blocks(m.puzzle, s)
    if problems:
        return None
    data = {ad.id: ad for ad in m.arrows}
    y_blocks, anchors, shifts = {}, {}, {}
    chain: dict[int, list] = defaultdict(list)
    for blk in blocks:
        ad = data[blk.arrow_id]
        if blk.ordinal > ad.blocks or not blk.cells <= ad.cells:
            return None
        y_blocks[blk.arrow_id, blk.ordinal] = set(blk.cells)
        anchors[blk.arrow_id, blk.ordinal] = blk.anchor
        chain[blk.arrow_id].append(blk)
    for aid, seq in chain.items():
        for prev, nxt in zip(seq, seq[1:]):
            ref = min(prev.cells)
            for c in sorted(nxt.cells):
                t = (c[0] - ref[0], c[1] - ref[1])
                if translate(prev.cells, t) <= nxt.cells:
                    shifts[aid, nxt.ordinal] = t
                    break
    return complete_assignment(m, y_blocks, anchors, shifts)
