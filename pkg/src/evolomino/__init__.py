"""Solve, verify, generate and benchmark Evolomino puzzles."""

from .grid import (Arrow, CellState, Coord, Puzzle, PuzzleFormatError, SolutionGrid,
                   parse_puzzle, parse_solution, region, serialize_puzzle, serialize_solution)
from .model import BuildOptions, IlpModel, add_exclusion, build_model, export_lp, stats
from .rules import Rule, Violation, is_solution, verify
from .solver import (Limits, SolveOutcome, Status, Uniqueness, enumerate_solutions, is_unique,
                     solve)
from .generator import GenerationFailed, GenParams, generate

__version__ = "0.1.0"
