"""Direct verifier of the Evolomino rules.

This module never looks at the integer model; it segments the drawn squares
into blocks and checks the rules on them.  It is the reference the model and
the solver are tested against.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field

from .grid import CellState, Coord, Puzzle, SolutionGrid, components


class Rule(enum.Enum):
    SQUARE_ON_SHADED = "SquareOnShaded"
    GIVEN_MISSING = "GivenMissing"
    BLOCK_WITHOUT_ANCHOR = "BlockWithoutAnchor"
    BLOCK_WITH_MULTIPLE_ANCHORS = "BlockWithMultipleAnchors"
    ARROW_TOO_FEW_BLOCKS = "ArrowTooFewBlocks"
    CONSECUTIVE_ARROW_SQUARES = "ConsecutiveArrowSquares"
    BAD_SIZE_PROGRESSION = "BadSizeProgression"
    BAD_SHAPE_PROGRESSION = "BadShapeProgression"


@dataclass(frozen=True)
class Violation:
    rule: Rule
    detail: str
    cells: tuple[Coord, ...] = ()

    def __str__(self) -> str:
        where = " ".join(str(c) for c in self.cells)
        return f"{self.rule.value}: {self.detail}" + (f" [{where}]" if where else "")


@dataclass(frozen=True)
class Block:
    cells: frozenset[Coord]
    anchor: Coord
    arrow_id: int
    ordinal: int = field(default=1)

    @property
    def size(self) -> int:
        return len(self.cells)


def _sorted(cells) -> tuple[Coord, ...]:
    return tuple(sorted(cells))


def extract_blocks(p: Puzzle, s: SolutionGrid) -> tuple[list[Block], list[Violation]]:
    """Split the squares of ``s`` into blocks.

    Returns the well-formed blocks (exactly one on-arrow square each) ordered
    by arrow id and ordinal, and the violations found while segmenting.
    """
    if (s.rows, s.cols) != (p.rows, p.cols):
        raise ValueError("solution dimensions do not match the puzzle")
    violations = []
    squares = s.squares()
    for c in sorted(squares):
        if p.state(c) is CellState.SHADED:
            violations.append(Violation(Rule.SQUARE_ON_SHADED, "square drawn on a shaded cell", (c,)))

    on_arrow = p.arrow_of()
    by_arrow: dict[int, list[tuple[int, frozenset[Coord], Coord]]] = defaultdict(list)
    for comp in components(squares):
        anchors = sorted(c for c in comp if c in on_arrow)
        if not anchors:
            violations.append(Violation(
                Rule.BLOCK_WITHOUT_ANCHOR, "block has no square on an arrow", _sorted(comp)))
        elif len(anchors) > 1:
            violations.append(Violation(
                Rule.BLOCK_WITH_MULTIPLE_ANCHORS, "block has several squares on arrows",
                tuple(anchors)))
        else:
            anchor = anchors[0]
            arrow = p.arrows[on_arrow[anchor]]
            by_arrow[arrow.id].append((arrow.index(anchor), frozenset(comp), anchor))

    blocks = []
    for aid in sorted(by_arrow):
        for k, (_, cells, anchor) in enumerate(sorted(by_arrow[aid]), start=1):
            blocks.append(Block(cells, anchor, aid, k))
    return blocks, violations


def check_evolution(prev: Block, nxt: Block) -> bool:
    """True iff ``nxt`` is a translate of ``prev`` plus exactly one square."""
    if len(nxt.cells) != len(prev.cells) + 1:
        return False
    ref = min(prev.cells)
    for c in nxt.cells:
        dr, dc = c[0] - ref[0], c[1] - ref[1]
        if all((q[0] + dr, q[1] + dc) in nxt.cells for q in prev.cells):
            return True
    return False


def verify(p: Puzzle, s: SolutionGrid) -> list[Violation]:
    """Every rule violation of ``s`` on ``p``; an empty list means solved."""
    blocks, violations = extract_blocks(p, s)
    for c in p.cells_in(CellState.GIVEN):
        if not s[c]:
            violations.append(Violation(Rule.GIVEN_MISSING, "given square is missing", (c,)))

    for a in p.arrows:
        for u, v in zip(a.path, a.path[1:]):
            if s[u] and s[v]:
                violations.append(Violation(
                    Rule.CONSECUTIVE_ARROW_SQUARES,
                    f"consecutive squares on arrow {a.id}", (u, v)))

    per_arrow: dict[int, list[Block]] = defaultdict(list)
    for b in blocks:
        per_arrow[b.arrow_id].append(b)
    for a in p.arrows:
        chain = per_arrow[a.id]
        if len(chain) < 2:
            violations.append(Violation(
                Rule.ARROW_TOO_FEW_BLOCKS,
                f"arrow {a.id} passes through {len(chain)} block(s)", (a.tail,)))
        for prev, nxt in zip(chain, chain[1:]):
            if nxt.size != prev.size + 1:
                violations.append(Violation(
                    Rule.BAD_SIZE_PROGRESSION,
                    f"arrow {a.id}: block {nxt.ordinal} has size {nxt.size}, "
                    f"expected {prev.size + 1}", (prev.anchor, nxt.anchor)))
            elif not check_evolution(prev, nxt):
                violations.append(Violation(
                    Rule.BAD_SHAPE_PROGRESSION,
                    f"arrow {a.id}: block {nxt.ordinal} does not extend block {prev.ordinal}",
                    (prev.anchor, nxt.anchor)))
    return violations


def is_solution(p: Puzzle, s: SolutionGrid) -> bool:
    return not verify(p, s)
