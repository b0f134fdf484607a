import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evolomino.grid import parse_puzzle, parse_solution  # noqa: E402
from evolomino.samples import SAMPLE_PUZZLE, SAMPLE_SOLUTION  # noqa: E402


@pytest.fixture
def sample():
    return parse_puzzle(SAMPLE_PUZZLE)


@pytest.fixture
def sample_solution():
    return parse_solution(SAMPLE_SOLUTION)
