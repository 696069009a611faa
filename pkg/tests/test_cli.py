import csv
import json
import subprocess
import sys
from dataclasses import replace

import pytest

from chpd.case import check_case, emit_case
from chpd.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main, run_cli
from chpd.report import SCHEDULE_COLUMNS, TRACE_COLUMNS
from conftest import mini_dhs_case


@pytest.fixture
def mini_file(tmp_path):
    case = replace(check_case(mini_dhs_case()), meta={"constant_flow": {"high": 9.0, "low": 2.0}})
    path = tmp_path / "mini.json"
    emit_case(case, path)
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_validate_bundled(capsys):
    assert run_cli(["validate", "--case", "case5_4"]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_validate_bad_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["validate", "--case", str(bad)]) == EXIT_INPUT
    assert main(["validate", "--case", str(tmp_path / "missing.json")]) == EXIT_INPUT
    assert main(["solve"]) == EXIT_INPUT
    assert main(["frobnicate"]) == EXIT_INPUT


def test_validate_reports_problems(tmp_path, mini_file):
    doc = json.loads(open(mini_file).read())
    doc["dhs"]["pipes"][0]["diameter"] = 0.0
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--case", str(path)]) == EXIT_INPUT


def test_solve_convex_writes_outputs(tmp_path, mini_file):
    out = tmp_path / "run"
    assert main(["solve", "--case", mini_file, "--mode", "convex", "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["objective"] is not None and summary["relaxed_objective"] is not None
    assert summary["relaxed_objective"] <= summary["objective"] + 1e-6
    rows = _rows(out / "schedules.csv")
    assert list(rows[0]) == SCHEDULE_COLUMNS
    assert {r["period"] for r in rows} == {"0", "1"}
    assert (out / "residuals.csv").exists()


def test_solve_adaptive_trace(tmp_path, mini_file):
    out = tmp_path / "ad"
    code = main(["solve", "--case", mini_file, "--mode", "adaptive", "--time-limit", "60",
                 "--max-iterations", "3", "--out", str(out)])
    assert code == EXIT_OK
    rows = _rows(out / "trace.csv")
    assert list(rows[0]) == TRACE_COLUMNS
    assert len(rows) == 3


def test_constant_flow_exit_codes(tmp_path, mini_file):
    assert main(["solve", "--case", mini_file, "--mode", "constant-flow", "--fixed-flow", "high"]) == EXIT_OK
    assert main(["solve", "--case", mini_file, "--mode", "constant-flow", "--fixed-flow", "low"]) == EXIT_INFEASIBLE
    assert main(["solve", "--case", mini_file, "--mode", "constant-flow", "--fixed-flow", "7.5"]) == EXIT_OK
    flows = tmp_path / "flows.json"
    flows.write_text(json.dumps({"1-2": 8.0}))
    assert main(["solve", "--case", mini_file, "--mode", "constant-flow", "--fixed-flow", str(flows)]) == EXIT_OK


def test_simulate_csv(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--case", "case33_30", "--pipe", "1-2", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "validation.csv")
    assert [float(r["flow_kg_s"]) for r in rows] == [150.0, 30.0]
    assert all(float(r["mean_rel_err"]) <= 0.02 for r in rows)
    assert len(_rows(out / "series.csv")) == 2 * 96


def test_bench_table(tmp_path, mini_file, capsys):
    out = tmp_path / "bench"
    assert main(["bench", "--case", mini_file, "--time-limit", "60", "--out", str(out)]) == EXIT_OK
    methods = [r["method"] for r in _rows(out / "bench.csv")]
    assert methods[0] == "convex n=1" and methods[1] == "misocp n=2"
    assert sum(m.startswith("constant-flow") for m in methods) == 2
    assert "recovered" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "chpd", "validate", "--case", "case5_4"],
                       capture_output=True, text=True)
    assert r.returncode == 0
