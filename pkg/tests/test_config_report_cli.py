import csv
import io
import json
import os
from pathlib import Path

import pytest

from dbarlab import cli
from dbarlab.config import load_config, parse_override
from dbarlab.errors import ConfigError
from dbarlab.report import Check, Series, csv_text, emit_report

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_every_committed_config_validates():
    files = sorted(CONFIGS.glob("*.yaml"))
    assert files
    names = set()
    for f in files:
        names.add(load_config(f).scenario)
    assert {"bm-reproduce", "homotopy-residual", "solve", "h0-reproduce", "kernel-identity",
            "lemma-sweep", "norm-report", "blowup-fit", "top-degree"} <= names


def test_override_parsing():
    assert parse_override("domain.delta=0.3") == {"domain": {"delta": 0.3}}
    assert parse_override("levels=[1, 2]") == {"levels": [1, 2]}
    with pytest.raises(ConfigError):
        parse_override("nonsense")


def test_validation_lists_every_problem():
    with pytest.raises(ConfigError) as e:
        load_config(data={"scenario": "nope", "seed": -1, "levels": [], "domain": {"kind": "cube"}})
    msg = str(e.value)
    for part in ("scenario", "seed", "levels", "domain.kind"):
        assert part in msg


def test_cutoff_must_fit_shell():
    with pytest.raises(ConfigError):
        load_config(data={"scenario": "solve", "cutoff": {"r0": 0.1, "r1": 0.5}})


def test_csv_round_trip():
    recs = [{"a": 1, "b": "x,y"}, {"a": 2.5, "b": 'q"uote'}]
    text = csv_text(recs)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2 and rows[0]["b"] == "x,y" and rows[1]["b"] == 'q"uote'
    assert text.endswith("\r\n")


def test_emit_report(tmp_path):
    paths = {k: str(tmp_path / f"out.{k}") for k in ("csv", "json", "plot")}
    checks = [Check("max_error", 1e-4, 5e-3, "<=")]
    emit_report([{"x": 1.0}], {"checks": [c.as_dict() for c in checks]}, paths,
                [Series("s", "x", "y", [1, 2], [3, 4])])
    doc = json.loads(Path(paths["json"]).read_text())
    assert doc["schema_version"] == "1.0"
    assert doc["checks"][0]["measured"] == 1e-4 and doc["checks"][0]["threshold"] == 5e-3
    plot = Path(paths["plot"]).read_text().splitlines()
    assert plot[0].startswith("#") and plot[1] == "# columns: x y" and plot[2].split() == ["1", "3"]


def test_emit_report_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], {}, {k: str(tmp_path / k) for k in ("csv", "json", "plot")})


def test_emit_report_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError) as e:
        emit_report([{"a": 1}], {}, {k: str(blocker / k) for k in ("csv", "json", "plot")})
    assert str(blocker) in str(e.value)


def test_cli_pass_and_files(tmp_path, capsys):
    code = cli.main(["run", str(CONFIGS / "jacobian-recursion.yaml"), "--out-dir", str(tmp_path)])
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"jacobian-recursion.csv", "jacobian-recursion.json",
                                                     "jacobian-recursion.dat"}
    assert "PASS" in capsys.readouterr().out


def test_cli_threshold_failure_exit_code(tmp_path):
    code = cli.main(["run", str(CONFIGS / "h0-reproduce.yaml"), "--out-dir", str(tmp_path),
                     "--override", "thresholds.max_error=1e-30", "--override", "levels=[0]"])
    assert code == 2


def test_cli_bad_scenario_writes_nothing(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("scenario: not-a-scenario\n")
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out-dir", str(out)]) == 1
    assert not out.exists()


def test_cli_missing_config(tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 1


def test_cli_seed_and_threads_flags(tmp_path):
    code = cli.main(["run", str(CONFIGS / "kernel-identity.yaml"), "--out-dir", str(tmp_path),
                     "--seed", "3", "--threads", "2", "-o", "pairs=5"])
    assert code == 0
    doc = json.loads((tmp_path / "kernel-identity.json").read_text())
    assert doc["config"]["seed"] == 3 and doc["config"]["threads"] == 2
    assert doc["records"] == 5


def test_lemma_sweep_reports_slope(tmp_path):
    code = cli.main(["run", str(CONFIGS / "lemma-intestl-i.yaml"), "--out-dir", str(tmp_path),
                     "-o", "lemma.cases=[{case: intestl-i, alphas: [0.25]}]"])
    doc = json.loads((tmp_path / "lemma-intestl-i.json").read_text())
    slope = [c for c in doc["checks"] if "slope" in c["name"]][0]["measured"]
    assert -0.45 < slope < -0.2
    assert code in (0, 2)


def test_runtime_error_recorded_per_row(tmp_path):
    # second point lies outside the ball: recorded as a failed row, sweep continues
    code = cli.main(["run", str(CONFIGS / "h0-reproduce.yaml"), "--out-dir", str(tmp_path),
                     "-o", "points=[[0.1, 0, 0, 0], [1.5, 0, 0, 0]]", "-o", "levels=[0]"])
    rows = list(csv.DictReader(io.StringIO((tmp_path / "h0-reproduce.csv").read_text())))
    assert len(rows) == 6
    assert any("DomainRangeError" in r["failure"] for r in rows)
    assert code == 2
