import itertools
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from evolomino.generator import (GenBoard, GenerationFailed, GenParams, board_solution,
                                 build_board, carve,
                                 generate, get_evolutions, get_next_dir, make_rng,
                                 try_add_arrow, valid_indices, weighted_shuffle)
from evolomino.grid import Coord, serialize_puzzle
from evolomino.model import build_model
from evolomino.rules import Block, check_evolution, is_solution
from evolomino.solver import Uniqueness, is_unique


@pytest.mark.parametrize("kwargs", [
    {"target_fill": 1.5}, {"p_stop_arrow": 0.0}, {"p_stop_blocks": 1.0}, {"min_arrow": 2},
    {"min_blocks": 1}, {"straight_bias": 0.5}, {"max_tries": -1},
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        GenParams(**kwargs)


def test_board_too_small():
    with pytest.raises(ValueError):
        generate(1, 5)


def test_zero_fill_places_nothing():
    with pytest.raises(GenerationFailed):
        generate(4, 4, GenParams(target_fill=0.0))


# -- walk --------------------------------------------------------------------------

def test_next_dir_stuck():
    b = GenBoard(1, 1)
    b.set_arrow(Coord(0, 0), 0)
    assert get_next_dir(Coord(0, 0), None, b, GenParams(), make_rng(0)) is None


def test_next_dir_forced_turn():
    b = GenBoard(2, 2)
    b.set_arrow(Coord(0, 0), 0)
    b.set_arrow(Coord(0, 1), 0)
    # heading east into the wall; the only legal move is south
    rng = make_rng(1)
    assert {get_next_dir(Coord(0, 1), (0, 1), b, GenParams(), rng, 0) for _ in range(50)} == {(1, 0)}


def test_next_dir_straight_bias_frequency():
    b = GenBoard(2, 5)
    b.set_arrow(Coord(0, 0), 0)
    b.set_arrow(Coord(0, 1), 0)
    rng = make_rng(2)
    params = GenParams(straight_bias=3.0)
    n = 100_000
    draws = Counter(get_next_dir(Coord(0, 1), (0, 1), b, params, rng, 0) for _ in range(n))
    assert set(draws) == {(0, 1), (1, 0)}
    assert abs(draws[(0, 1)] / n - 0.75) <= 0.03


def test_walk_does_not_touch_itself():
    for seed in range(30):
        b, _ = build_board(6, 6, GenParams(seed=seed), make_rng(seed))
        for path in b.paths:
            pos = {c: i for i, c in enumerate(path)}
            for c, i in pos.items():
                for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                    j = pos.get((c[0] + dr, c[1] + dc))
                    assert j is None or abs(i - j) == 1


# -- weighted shuffle --------------------------------------------------------------

def test_weighted_shuffle_uniform_weights():
    rng = make_rng(3)
    items = "abcd"
    n = 24_000
    seen = Counter(tuple(weighted_shuffle(items, [1.0] * 4, rng)) for _ in range(n))
    perms = list(itertools.permutations(items))
    assert set(seen) == set(perms)
    assert chisquare([seen[p] for p in perms]).pvalue > 1e-3


def test_weighted_shuffle_heavy_item_first():
    rng = make_rng(4)
    n = 40_000
    first = sum(weighted_shuffle(["heavy", "light"], [1000, 1], rng)[0] == "heavy" for _ in range(n))
    assert abs(first / n - 1000 / 1001) <= 0.005


def test_weighted_shuffle_edge_cases():
    rng = make_rng(5)
    assert weighted_shuffle(["only"], [2.5], rng) == ["only"]
    assert weighted_shuffle([], [], rng) == []
    with pytest.raises(ValueError):
        weighted_shuffle([1, 2], [1.0], rng)
    with pytest.raises(ValueError):
        weighted_shuffle([1, 2], [1.0, 0.0], rng)


# -- shapes and anchors ------------------------------------------------------------

def test_evolutions_of_single_cell():
    evo = get_evolutions({(2, 2)})
    assert len(evo) == 4 and all(len(s) == 2 for s in evo)


def test_evolutions_of_vertical_domino():
    evo = get_evolutions({(1, 1), (2, 1)})
    assert len(evo) == 6
    assert len(set(evo)) == 6


def test_evolutions_clipped_at_corner():
    assert len(get_evolutions({(0, 0)}, 3, 3)) == 2
    assert len(get_evolutions({(0, 0)})) == 4


def test_valid_indices():
    assert valid_indices(6, 0, 0, 2) == [0, 1, 2, 3]
    assert valid_indices(6, 1, 1, 2) == [3, 4, 5]
    assert valid_indices(6, 4, 1, 2) == []
    assert valid_indices(7, 0, 0, 3) == [0, 1, 2]


def test_failed_arrow_leaves_board_untouched():
    # every cell of a 1x3 board is on the path, so no two-cell block fits
    params = GenParams()
    for seed in range(20):
        b = GenBoard(1, 3)
        before = b.snapshot()
        assert not try_add_arrow(b, params, make_rng(seed))
        assert b.snapshot() == before and b.journal == []


def test_undo_restores_previous_state():
    params = GenParams()
    rng = make_rng(6)
    b = GenBoard(6, 6)
    while not try_add_arrow(b, params, rng):
        pass
    before = b.snapshot()
    while not try_add_arrow(b, params, rng):
        pass
    assert b.snapshot() != before
    b.undo_last_arrow()
    assert b.snapshot() == before


def test_placed_blocks_evolve_pairwise():
    for seed in range(25):
        b, _ = build_board(6, 6, GenParams(seed=seed), make_rng(seed))
        for aid, (path, blocks) in enumerate(zip(b.paths, b.blocks)):
            assert len(blocks) >= 2
            anchors = []
            for k, cells in enumerate(blocks, 1):
                on = [c for c in cells if c in path]
                assert len(on) == 1
                anchors.append(path.index(on[0]))
                if k > 1:
                    prev = Block(blocks[k - 2], min(blocks[k - 2]), aid, k - 1)
                    assert check_evolution(prev, Block(cells, on[0], aid, k))
            assert all(j - i >= 2 for i, j in zip(anchors, anchors[1:]))


# -- full pipeline -----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_generated_puzzle_is_valid_and_unique(seed):
    g = generate(5, 5, GenParams(seed=seed))
    assert is_solution(g.puzzle, g.solution)
    assert is_unique(build_model(g.puzzle), g.solution) is Uniqueness.UNIQUE
    assert g.timeouts == 0 and g.probes > 0
    meta = g.metadata("x")
    assert meta["seed"] == seed and meta["arrows"] == len(g.puzzle.arrows)


def test_generation_is_deterministic():
    a, b = (generate(5, 5, GenParams(seed=11)) for _ in range(2))
    assert serialize_puzzle(a.puzzle) == serialize_puzzle(b.puzzle)
    assert a.solution == b.solution and a.metadata() == b.metadata()
    c = generate(5, 5, GenParams(seed=12))
    assert serialize_puzzle(c.puzzle) != serialize_puzzle(a.puzzle)


def test_carving_a_carved_puzzle_changes_nothing():
    g = generate(5, 5, GenParams(seed=2))
    again = carve(g.puzzle, g.solution, np.random.Generator(np.random.PCG64(99)))
    assert again.puzzle == g.puzzle


def test_ambiguous_full_board_is_rebuilt():
    # seed 11 first builds a board whose free arrow cell (3,4) can hold an
    # extra one-square block even with every clue in place
    params = GenParams(seed=11)
    rng = make_rng(11)
    b, _ = build_board(5, 5, params, rng)
    p, sol = board_solution(b)
    assert is_unique(build_model(p), sol) is Uniqueness.NOT_UNIQUE
    g = generate(5, 5, params)
    assert g.boards >= 2 and g.metadata()["boards"] == g.boards
    assert is_unique(build_model(g.puzzle), g.solution) is Uniqueness.UNIQUE


def test_board_limit():
    with pytest.raises(ValueError):
        GenParams(max_boards=0)
    with pytest.raises(GenerationFailed, match="no board with a unique solution"):
        generate(5, 5, GenParams(seed=11, max_boards=1))
