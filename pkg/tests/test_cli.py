from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from opsf.cli import _ints, build_parser, main


def run(*argv):
    return main([str(a) for a in argv])


def test_int_ranges():
    assert _ints("1-3,7") == [1, 2, 3, 7]
    assert _ints("-2") == [-2]


def test_global_flags_accepted_on_either_side(tmp_path):
    p = build_parser()
    a = p.parse_args(["--workers", "3", "report-loops"])
    b = p.parse_args(["report-loops", "--workers", "3"])
    assert a.workers == b.workers == 3
    assert p.parse_args(["report-loops"]).out_dir == "opsf-out"


def test_gen_solve_validate_round_trip(tmp_path, capsys):
    case = tmp_path / "case.json"
    assert run("gen-case", "--copies", 2, "--seed", 3, "--out", case) == 0
    doc = json.loads(case.read_text())
    assert set(doc) >= {"nodes", "lines", "generators", "loads", "shunts", "base_mva"}
    sol = tmp_path / "sol.json"
    for form in ("original-pc", "abstracted-pc", "naive-loop", "iterative-loop"):
        assert run("--out-dir", tmp_path, "solve", "--network", case, "--alpha", 0.8,
                   "--formulation", form, "--out", sol) == 0
        assert "validator: clean" in capsys.readouterr().out
        assert run("--out-dir", tmp_path, "validate", "--network", case,
                   "--solution", sol) == 0
        assert json.loads((tmp_path / "validation.json").read_text())["clean"]


def test_validate_rejects_tampered_solution(tmp_path):
    case, sol = tmp_path / "case.json", tmp_path / "sol.json"
    run("gen-case", "--out", case)
    assert run("--out-dir", tmp_path, "solve", "--network", case, "--alpha", 1.0,
               "--out", sol) == 0
    doc = json.loads(sol.read_text())
    doc["objective"] += 1.0
    sol.write_text(json.dumps(doc))
    assert run("--out-dir", tmp_path, "validate", "--network", case, "--solution", sol) == 1
    report = json.loads((tmp_path / "validation.json").read_text())
    assert not report["objective_ok"]


def test_solve_default_output_path(tmp_path):
    assert run("solve", "--out-dir", tmp_path, "--alpha", 0.7) == 0
    assert json.loads((tmp_path / "solution.json").read_text())["alpha"] == 0.7


def test_sweep_writes_csv_and_figures(tmp_path):
    code = run("--out-dir", tmp_path, "sweep", "--alphas", "0,0.7,1", "--seeds", "1-2",
               "--formulations", "abstracted-pc,iterative-loop")
    assert code == 0
    with open(tmp_path / "sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3 * 2 * 2
    for name in ("timing_summary.csv", "sweep.json", "solve_times.png",
                 "tradeoff_vs_alpha.png", "tradeoff_vs_seed.png"):
        assert (tmp_path / name).stat().st_size > 0
    assert len(list((tmp_path / "cases").glob("*.json"))) == 2


def test_audit_sizes_reports_reference(tmp_path, capsys):
    assert run("--out-dir", tmp_path, "audit-sizes", "--copies", "1,2") == 0
    out = capsys.readouterr().out
    assert "copies=1 original_pc: built (369, 215, 144)" in out and "match" in out
    assert (tmp_path / "audit_sizes.csv").exists()
    # the single-copy abstracted sizes differ from the reference ones (10 blocks, not 9)
    assert run("--out-dir", tmp_path, "audit-sizes", "--copies", "1",
               "--check-reference") == 1


def test_report_loops_cap(tmp_path, capsys):
    assert run("--out-dir", tmp_path, "report-loops", "--copies", "1,2",
               "--max-cycles", 5) == 0
    with open(tmp_path / "loops.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[1]["loops"] == "5+" and rows[1]["complete"] == "False"


def test_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": [], "lines": []}))
    assert run("solve", "--network", bad) == 2
    assert run("gen-case", "--copies", 0, "--out", tmp_path / "x.json") == 2
    assert "error" in capsys.readouterr().err


def test_unknown_formulation_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["solve", "--formulation", "mst"])


def test_naive_enumeration_cap_exit_code(tmp_path, capsys):
    code = run("--out-dir", tmp_path, "solve", "--copies", 2, "--formulation", "naive-loop",
               "--max-cycles", 3)
    assert code == 2
    assert "intractable" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "opsf.cli", "--out-dir", str(tmp_path),
                          "report-loops", "--copies", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and "loops" in res.stdout
