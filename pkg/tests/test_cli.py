import json
import subprocess
import sys

import jsonschema
import pytest

from evolomino.cli import EX_DATAERR, EX_NOINPUT, EX_USAGE, SCHEMA_PATH, main
from evolomino.grid import parse_puzzle, parse_solution
from evolomino.rules import is_solution
from evolomino.samples import SAMPLE_PUZZLE, SAMPLE_SOLUTION

SCHEMA = json.loads(SCHEMA_PATH.read_text())


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "sample.puzzle").write_text(SAMPLE_PUZZLE)
    (tmp_path / "sample.solution").write_text(SAMPLE_SOLUTION)
    return tmp_path


def files(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*"))


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, SCHEMA)
    assert doc["exit_code"] == code
    return code, doc


def test_solve_prints_solution(work, capsys):
    assert main(["solve", "sample.puzzle"]) == 0
    assert capsys.readouterr().out == SAMPLE_SOLUTION
    assert files(work) == ["sample.puzzle", "sample.solution"]


def test_solve_stats_go_to_stderr(work, capsys):
    assert main(["solve", "sample.puzzle", "--stats", "--seed", "3"]) == 0
    out, err = capsys.readouterr()
    assert out == SAMPLE_SOLUTION
    assert "nodes:" in err and "wall_time:" in err


def test_solve_enumerate(work, capsys):
    assert main(["solve", "--enumerate", "5", "sample.puzzle"]) == 0
    out = capsys.readouterr().out
    assert out == SAMPLE_SOLUTION + "proved unique\n"


def test_solve_infeasible_exit_code(work, capsys):
    (work / "line.puzzle").write_text("evolomino v1\nrows 1 cols 3\ngrid:\n...\narrow: 1,1 1,2 1,3\n")
    assert main(["solve", "line.puzzle"]) == 1
    assert capsys.readouterr().out == "Infeasible\n"


def test_solve_timeout_exit_code(work, capsys):
    text = SAMPLE_PUZZLE.replace("...#O", "...#.").replace("O....", ".....")
    assert "O" not in text.split("grid:")[1]
    (work / "open.puzzle").write_text(text)
    assert main(["solve", "open.puzzle", "--node-limit", "1"]) == 2
    assert capsys.readouterr().out == "TimedOut\n"


def test_solve_export_lp(work, capsys):
    assert main(["solve", "sample.puzzle", "--export-lp", "m.lp"]) == 0
    text = (work / "m.lp").read_text()
    assert text.startswith("\\") and text.endswith("End\n")


def test_verify(work, capsys):
    assert main(["verify", "sample.puzzle", "sample.solution"]) == 0
    assert capsys.readouterr().out == "OK\n"
    bad = SAMPLE_SOLUTION.replace(".*.**", ".*.*.", 1)
    (work / "bad.solution").write_text(bad)
    assert main(["verify", "sample.puzzle", "bad.solution"]) == 1
    assert capsys.readouterr().out.strip()


def test_json_outputs_match_schema(work, capsys):
    code, doc = run_json(capsys, ["solve", "sample.puzzle"])
    assert code == 0 and doc["status"] == "Feasible"
    assert "\n".join(doc["solution"]) + "\n" == SAMPLE_SOLUTION.split("grid:\n")[1]
    code, doc = run_json(capsys, ["solve", "sample.puzzle", "--enumerate", "3"])
    assert doc["count"] == 1 and doc["complete"] and doc["verdict"] == "proved unique"
    code, doc = run_json(capsys, ["verify", "sample.puzzle", "sample.solution"])
    assert doc["ok"] and doc["violations"] == []
    code, doc = run_json(capsys, ["stats", "sample.puzzle"])
    assert (doc["total_variables"], doc["total_constraints"]) == (509, 1645)
    code, doc = run_json(capsys, ["stats", "sample.puzzle", "--full-index-sets", "--convention", "algebraic"])
    assert (doc["total_variables"], doc["total_constraints"]) == (677, 1981)


def test_stats_table(work, capsys):
    assert main(["stats", "sample.puzzle"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("convention: structural\n")
    assert "509" in out and "1645" in out


def test_export_to_stdout_and_file(work, capsys):
    assert main(["export", "sample.puzzle"]) == 0
    text = capsys.readouterr().out
    assert main(["export", "sample.puzzle", "--out", "sample.lp"]) == 0
    assert (work / "sample.lp").read_text() == text
    assert main(["export", "sample.puzzle", "--tight-big-m", "--out", "tight.lp"]) == 0
    assert (work / "tight.lp").read_text() != text


def test_generate_writes_files(work, capsys):
    argv = ["generate", "--rows", "5", "--cols", "5", "--seed", "4", "--out", "set"]
    assert main(argv) == 0
    assert main(argv[:-2] + ["--out", "set", "--name", "again"]) == 0
    capsys.readouterr()
    stem = "evolomino_5x5_4"
    assert files(work / "set") == sorted([f"{stem}.puzzle", f"{stem}.solution", "again.puzzle",
                                          "again.solution", "metadata.jsonl"])
    p = parse_puzzle((work / "set" / f"{stem}.puzzle").read_text())
    s = parse_solution((work / "set" / f"{stem}.solution").read_text())
    assert is_solution(p, s)
    assert (work / "set" / "again.puzzle").read_text() == (work / "set" / f"{stem}.puzzle").read_text()
    meta = [json.loads(line) for line in (work / "set" / "metadata.jsonl").read_text().splitlines()]
    assert [m["name"] for m in meta] == [stem, "again"]
    assert all(m["seed"] == 4 and m["probes"] > 0 for m in meta)
    assert {"given_squares", "shaded_cells", "fill", "params"} <= set(meta[0])


def test_generate_stdout_and_json(work, capsys):
    assert main(["generate", "--rows", "4", "--cols", "4", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    puzzle_text, solution_text = out.split("\n\n")
    assert is_solution(parse_puzzle(puzzle_text), parse_solution(solution_text))
    code, doc = run_json(capsys, ["generate", "--rows", "4", "--cols", "4", "--seed", "1"])
    assert doc["puzzle"] == puzzle_text + "\n"
    assert files(work) == ["sample.puzzle", "sample.solution"]


def test_generate_without_seed_reports_it(work, capsys):
    assert main(["generate", "--rows", "3", "--cols", "3"]) == 0
    err = capsys.readouterr().err
    seed = int(err.split("seed: ")[1].split()[0])
    assert 0 <= seed < 2 ** 64


def test_generate_failure_is_data_error(work, capsys):
    assert main(["generate", "--rows", "3", "--cols", "3", "--seed", "0", "--target-fill", "0"]) == EX_DATAERR
    assert "no arrow placed" in capsys.readouterr().err


def test_bench(work, capsys):
    (work / "inst").mkdir()
    (work / "inst" / "sample.puzzle").write_text(SAMPLE_PUZZLE)
    (work / "inst" / "junk.puzzle").write_text("nonsense\n")
    code, doc = run_json(capsys, ["bench", "inst", "--csv", "out.csv", "--table", "out.md"])
    assert code == 0 and doc["instances"] == 2 and doc["errors"] == 1
    lines = (work / "out.csv").read_text().splitlines()
    assert lines[0].startswith("id,size,vars,constraints,status,ms,nodes")
    assert len(lines) == 3
    assert "| 5x5 |" in (work / "out.md").read_text()


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["solve"],
    ["solve", "sample.puzzle", "--time-limit", "-1"],
    ["solve", "sample.puzzle", "--enumerate", "0"],
    ["generate", "--rows", "1", "--cols", "5"],
    ["generate", "--rows", "5", "--cols", "5", "--target-fill", "1.5"],
    ["generate", "--rows", "5", "--cols", "5", "--seed", "-3"],
    ["bench", "inst"],
    ["stats", "sample.puzzle", "--convention", "other"],
])
def test_usage_errors(work, capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EX_USAGE
    assert "usage:" in capsys.readouterr().err


def test_missing_and_malformed_input(work, capsys):
    assert main(["solve", "absent.puzzle"]) == EX_NOINPUT
    assert "no such file" in capsys.readouterr().err
    (work / "bad.puzzle").write_text("evolomino v1\nrows 3 cols 3\ngrid:\n...\n...\n...\narrow: 1,1 1,3 2,3\n")
    assert main(["solve", "bad.puzzle"]) == EX_DATAERR
    assert "line 7: non-contiguous arrow path" in capsys.readouterr().err
    assert main(["bench", "nowhere", "--csv", "x.csv"]) == EX_NOINPUT


def test_module_entry_point(work):
    res = subprocess.run([sys.executable, "-m", "evolomino", "verify", "sample.puzzle", "sample.solution"],
                         capture_output=True, text=True, cwd=work)
    assert (res.returncode, res.stdout) == (0, "OK\n")
