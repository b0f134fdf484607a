import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evolomino.grid import (Arrow, CellState, Coord, Puzzle, PuzzleFormatError, SolutionGrid,
                            Translation, max_blocks, neighbors, next_on_arrow, parse_puzzle,
                            parse_solution, preceding_on_arrow, region, serialize_puzzle,
                            serialize_solution, translations_from)
from evolomino.samples import SAMPLE_PUZZLE, SAMPLE_SOLUTION

from oracles import simple_paths


def C(*pairs):
    return {Coord(*p) for p in pairs}


def header(rows, cols, grid, *arrows):
    return "\n".join(["evolomino v1", f"rows {rows} cols {cols}", "grid:", *grid, *arrows]) + "\n"


# -- parsing -----------------------------------------------------------------------

def test_parse_sample(sample):
    assert (sample.rows, sample.cols) == (5, 5)
    assert set(sample.cells_in(CellState.SHADED)) == C((2, 4), (5, 5))
    assert set(sample.cells_in(CellState.GIVEN)) == C((3, 1), (2, 5))
    assert [len(a.path) for a in sample.arrows] == [3, 6, 3]
    assert sample.arrows[0].path == (Coord(5, 1), Coord(5, 2), Coord(5, 3))
    assert sample.arrows[1].tail == Coord(3, 1) and sample.arrows[1].head == Coord(1, 4)


def test_parse_rejects_non_contiguous_path():
    text = header(3, 3, ["...", "...", "..."], "arrow: 1,1 1,3 2,3")
    with pytest.raises(PuzzleFormatError) as err:
        parse_puzzle(text)
    assert err.value.reason == "non-contiguous arrow path"
    assert err.value.line == 7


def test_parse_rejects_short_arrow():
    with pytest.raises(PuzzleFormatError, match="arrow length < 3"):
        parse_puzzle(header(1, 2, [".."], "arrow: 1,1 1,2"))


def test_length_two_arrow_has_no_solution_by_brute_force():
    # why the parser insists on three cells: two blocks need two
    # non-consecutive anchors, impossible on a two-cell path
    from evolomino.rules import is_solution
    shell = Puzzle(1, 2, ((CellState.EMPTY,) * 2,))
    p = Puzzle.__new__(Puzzle)
    object.__setattr__(p, "rows", 1)
    object.__setattr__(p, "cols", 2)
    object.__setattr__(p, "cells", shell.cells)
    object.__setattr__(p, "arrows", (Arrow(0, (Coord(1, 1), Coord(1, 2))),))
    grids = [SolutionGrid(((a, b),)) for a in (False, True) for b in (False, True)]
    assert not any(is_solution(p, s) for s in grids)


@pytest.mark.parametrize("grid, arrows, reason", [
    (["#..", "...", "..."], ["arrow: 1,1 1,2 1,3"], "arrow over shaded cell"),
    (["...", "...", "..."], ["arrow: 1,1 1,2 1,3", "arrow: 2,1 2,2 1,2"], "overlapping arrows"),
    (["...", "...", "..."], ["arrow: 1,1 1,2 1,1"], "arrow path revisits a cell"),
    (["...", "...", "..."], ["arrow: 1,1 1,2 1,4"], "cell 1,4 is off the board"),
])
def test_parse_arrow_errors(grid, arrows, reason):
    with pytest.raises(PuzzleFormatError) as err:
        parse_puzzle(header(3, 3, grid, *arrows))
    assert err.value.reason == reason


@pytest.mark.parametrize("text, line", [
    ("evolomino v2\nrows 1 cols 1\ngrid:\n.\n", 1),
    ("evolomino v1\nrows one cols 1\ngrid:\n.\n", 2),
    ("evolomino v1\nrows 1 cols 1\ngrid\n.\n", 3),
    ("evolomino v1\nrows 2 cols 2\ngrid:\n..\n", 5),
    ("evolomino v1\nrows 1 cols 2\ngrid:\n...\n", 4),
    ("evolomino v1\nrows 1 cols 2\ngrid:\n.x\n", 4),
    ("evolomino v1\nrows 1 cols 3\ngrid:\n...\nline\n", 5),
    ("evolomino v1\nrows 1 cols 3\ngrid:\n...\narrow: 1;1 1,2 1,3\n", 5),
])
def test_parse_reports_line_numbers(text, line):
    with pytest.raises(PuzzleFormatError) as err:
        parse_puzzle(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}: ")


def test_serialize_sample_is_byte_identical(sample):
    assert serialize_puzzle(sample) == SAMPLE_PUZZLE


def test_serialize_one_by_one():
    assert serialize_puzzle(Puzzle.empty(1, 1)) == "evolomino v1\nrows 1 cols 1\ngrid:\n.\n"


def test_solution_round_trip(sample, sample_solution):
    assert serialize_solution(sample_solution, sample) == SAMPLE_SOLUTION
    assert parse_solution(serialize_solution(sample_solution)) == sample_solution
    assert len(sample_solution.squares()) == 12


def test_solution_rejects_bad_symbol():
    with pytest.raises(PuzzleFormatError, match="solution rows"):
        parse_solution("evolomino v1\nrows 1 cols 2\ngrid:\n*O\n")


@st.composite
def puzzles(draw):
    rows = draw(st.integers(1, 5))
    cols = draw(st.integers(1, 5))
    cells = [[draw(st.sampled_from(list(CellState))) for _ in range(cols)] for _ in range(rows)]
    arrows, taken = [], set()
    for _ in range(draw(st.integers(0, 3))):
        options = [p for p in simple_paths(rows, cols) if len(p) <= 6 and not taken & set(p)] \
            if rows * cols <= 9 else []
        if not options:
            break
        path = draw(st.sampled_from(options))
        arrows.append(path)
        taken |= set(path)
    for r, c in taken:
        if cells[r - 1][c - 1] is CellState.SHADED:
            cells[r - 1][c - 1] = CellState.EMPTY
    return Puzzle(rows, cols, tuple(map(tuple, cells)),
                  tuple(Arrow(k, path) for k, path in enumerate(arrows)))


@settings(max_examples=150, deadline=None)
@given(puzzles())
def test_round_trip_property(p):
    assert parse_puzzle(serialize_puzzle(p)) == p


# -- derived sets ------------------------------------------------------------------

def test_region_sample_bottom_arrow(sample):
    assert region(sample, sample.arrows[0]) == C((5, 1), (5, 2), (5, 3), (5, 4), (4, 2), (4, 3),
                                             (3, 3), (2, 2), (2, 3))


def test_region_without_refinement_reaches_cells_next_to_foreign_given(sample):
    raw = region(sample, sample.arrows[0], refine=False)
    assert raw - region(sample, sample.arrows[0]) == C((4, 1), (3, 2))


def test_region_single_arrow_is_whole_board():
    p = Puzzle.empty(3, 4, [[(2, 1), (2, 2), (2, 3)]])
    assert region(p, p.arrows[0]) == set(p.all_cells())


def test_region_confined_by_foreign_arrow():
    p = Puzzle.empty(3, 3, [[(1, 1), (2, 1), (3, 1)], [(1, 2), (2, 2), (3, 2)]])
    assert region(p, p.arrows[0]) == C((1, 1), (2, 1), (3, 1))
    assert region(p, p.arrows[1]) == C((1, 2), (2, 2), (3, 2), (1, 3), (2, 3), (3, 3))


@settings(max_examples=150, deadline=None)
@given(puzzles())
def test_region_invariants(p):
    on_arrows = p.arrow_of()
    for a in p.arrows:
        reg = region(p, a)
        assert set(a.path) <= reg
        assert not any(p.state(c) is CellState.SHADED for c in reg)
        assert all(on_arrows[c] == a.id for c in reg if c in on_arrows)
        for i in reg:
            ts = translations_from(p, a, i, reg)
            assert all(t.admissible and i + t in reg for t in ts)


@pytest.mark.parametrize("length, expected", [(3, 2), (6, 3), (4, 2), (7, 4)])
def test_max_blocks(length, expected):
    assert max_blocks(Arrow(0, tuple(Coord(1, c) for c in range(1, length + 1)))) == expected


def test_max_blocks_bounded_by_half_board(sample):
    assert all(max_blocks(a) <= -(-sample.size // 2) for a in sample.arrows)


def test_translations_exclude_zero_and_unit_shifts(sample):
    a = sample.arrows[1]
    for i in region(sample, a):
        ts = translations_from(sample, a, i)
        assert not ts & {(0, 0), (0, 1), (1, 0), (0, -1), (-1, 0)}


def test_translations_two_by_three():
    p = Puzzle.empty(2, 3, [[(1, 1), (1, 2), (1, 3)]])
    ts = translations_from(p, p.arrows[0], Coord(1, 1))
    # targets (1,3), (2,2), (2,3): the only cells neither (1,1) itself nor adjacent to it
    assert ts == {Translation(0, 2), Translation(1, 1), Translation(1, 2)}
    assert Translation(1, 2) in ts


def test_next_on_arrow(sample):
    a1, _, a3 = sample.arrows
    assert next_on_arrow(a1, Coord(5, 1)) == Coord(5, 2)
    assert next_on_arrow(a1, a1.head) is None
    assert next_on_arrow(a3, Coord(4, 4)) == Coord(3, 4)
    with pytest.raises(ValueError, match="not on arrow"):
        next_on_arrow(a1, Coord(1, 1))


def test_preceding_on_arrow(sample):
    a1, a2, _ = sample.arrows
    assert preceding_on_arrow(a2, a2.tail) == []
    assert preceding_on_arrow(a2, Coord(1, 2)) == [Coord(3, 1), Coord(2, 1), Coord(1, 1)]
    assert preceding_on_arrow(a1, a1.head) == [Coord(5, 1), Coord(5, 2)]
    with pytest.raises(ValueError):
        preceding_on_arrow(a1, Coord(1, 1))


def test_neighbors(sample):
    assert neighbors(sample, Coord(1, 1)) == C((1, 2), (2, 1))
    assert len(neighbors(sample, Coord(3, 3))) == 4
    assert neighbors(Puzzle.empty(1, 1), Coord(1, 1)) == set()


def test_cell_index_is_row_major(sample):
    assert [sample.index(c) for c in sample.all_cells()] == list(range(1, 26))


def test_puzzle_constructor_validates():
    with pytest.raises(ValueError, match="arrow length < 3"):
        Puzzle.empty(2, 2, [[(1, 1), (1, 2)]])
    with pytest.raises(ValueError, match="dimensions"):
        Puzzle.empty(0, 3)
