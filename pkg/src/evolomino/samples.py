"""Sample instance used in docs and tests (5x5 board with three arrows)."""

SAMPLE_PUZZLE = """\
evolomino v1
rows 5 cols 5
grid:
.....
...#O
O....
.....
....#
arrow: 5,1 5,2 5,3
arrow: 3,1 2,1 1,1 1,2 1,3 1,4
arrow: 4,5 4,4 3,4
"""

SAMPLE_SOLUTION = """\
evolomino v1
rows 5 cols 5
grid:
.*.**
.*.#*
*.**.
....*
*.**#
"""
