import json

import pytest

from fecsim.cli import main
from fecsim.core import CodingParams, PolicySpec, SimConfig, save_config
from fecsim.servicemodels import Exponential


@pytest.fixture
def config_file(tmp_path):
    cfg = SimConfig(2.0, 4, CodingParams(5, 2), PolicySpec("round_robin"), Exponential(1.0), 200, replications=3)
    path = tmp_path / "sim.ini"
    save_config(cfg, path)
    return path


def test_run_table(config_file, capsys):
    assert main(["run", str(config_file), "--workers", "1"]) == 0
    out = capsys.readouterr().out
    assert "replications 3" in out and "mean delay" in out


def test_run_json_with_out_dir(config_file, tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert main(["run", str(config_file), "--format", "json", "--out", str(out_dir), "--seed", "7",
                 "--replications", "2", "--workers", "1"]) == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["master_seed"] == 7 and summary["replications"] == 2
    assert (out_dir / "records_rep0001.csv").exists() and (out_dir / "config.ini").exists()


def test_run_invalid_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    text = SimConfig(2.0, 4, CodingParams(5, 2), PolicySpec("greedy"), Exponential(1.0), 10).to_text()
    path.write_text(text.replace("n = 5", "n = 3"))
    assert main(["run", str(path)]) == 2
    assert "coding.n" in capsys.readouterr().err


def test_missing_file_exits_nonzero(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2
    assert capsys.readouterr().err


def test_preset_csv(capsys):
    assert main(["preset", "fig8", "--replications", "2", "--arrivals", "500", "--format", "csv",
                 "--workers", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("scenario,sweep,value,policy") and len(lines) == 9


def test_preset_fig10_table(capsys):
    assert main(["preset", "fig10", "--replications", "500"]) == 0
    assert "sup|analytic-simulated|" in capsys.readouterr().out


def test_trace_report(tmp_path, capsys):
    path = tmp_path / "t.txt"
    path.write_text("delay_ms\n100\n120\n180\n105\n")
    assert main(["trace-report", str(path), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["fit"]["shift_ms"] == 100.0
    path.write_text("1\n-2\n")
    assert main(["trace-report", str(path)]) == 2
    assert "row 2" in capsys.readouterr().err


def test_verify_subset(capsys):
    assert main(["verify", "--tier", "smoke", "--only", "5", "6"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all("[PASS]" in line for line in out)
