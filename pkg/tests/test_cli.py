import filecmp
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from heislift import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _config(tmp_path, **changes):
    obj = json.loads((CONFIGS / "golden.json").read_text())
    analysis = changes.pop("analysis", {})
    obj.update(changes)
    obj["analysis"].update(analysis)
    shutil.copy(CONFIGS / "golden_boundary.csv", tmp_path / "golden_boundary.csv")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(obj))
    return path


def test_check_valid_config(capsys):
    assert cli.main(["check", "--config", str(CONFIGS / "golden.json")]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report == {"ok": True, "violations": [], "warnings": []}


def test_check_names_a_site_outside_omega(tmp_path, capsys):
    path = _config(tmp_path)
    with open(tmp_path / "golden_boundary.csv", "a") as fh:
        fh.write("1.5,0.0,0.0,0.0,0.0\n")
    assert cli.main(["check", "--config", str(path)]) == cli.EXIT_CONFIG
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"]
    assert any("site 20" in v and "not inside omega" in v for v in report["violations"])


def test_check_warns_for_large_p(tmp_path, capsys):
    path = _config(tmp_path, analysis={"p_list": [1.0, 2.0]})
    assert cli.main(["check", "--config", str(path)]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and any("p = 2 >= n + 1" in w for w in report["warnings"])


@pytest.mark.parametrize("command", ["check", "run"])
def test_heisenberg_two_skeleton_is_rejected_early(tmp_path, capsys, command):
    path = _config(tmp_path, n=2)
    assert cli.main([command, "--config", str(path)]) == cli.EXIT_UNSUPPORTED_FILL
    err = capsys.readouterr().err
    assert err.startswith("heislift: ") and "heisenberg" in err.lower()
    assert not (tmp_path / "golden_out").exists()


def test_unreadable_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli.main(["run", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "heislift: config:" in capsys.readouterr().err
    path.write_text(json.dumps({"m": 2, "n": 1, "target": {"kind": "riemann"}}))
    assert cli.main(["check", "--config", str(path)]) == cli.EXIT_CONFIG
    report = json.loads(capsys.readouterr().out)
    assert any(v.startswith("target:") for v in report["violations"])


def test_small_sample_count_is_rejected(tmp_path, capsys):
    path = _config(tmp_path, analysis={"N": 500})
    assert cli.main(["check", "--config", str(path)]) == cli.EXIT_CONFIG
    assert any(v.startswith("N:") for v in json.loads(capsys.readouterr().out)["violations"])


def test_euclidean_run_skips_heisenberg_checks(tmp_path, capsys):
    csv = tmp_path / "euclid.csv"
    csv.write_text("# x,y,value\n-0.5,0.0,0.0\n0.5,0.0,1.0\n0.1,0.6,0.5\n")
    cfg = {
        "m": 2, "n": 1,
        "omega": {"lo": [-1, -1], "hi": [1, 1]},
        "target": {"kind": "euclidean", "dim": 1},
        "data": "euclid.csv",
        "max_generation": 6,
        "analysis": {"N": 10000, "p_list": [1.0], "trace_N": 2000},
        "output": "out",
    }
    path = tmp_path / "euclid.json"
    path.write_text(json.dumps(cfg))
    code = cli.main(["run", "--config", str(path)])
    captured = capsys.readouterr()
    assert "need a Heisenberg target" in captured.err
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert "contact" not in summary["checks"] and "domination" not in summary["checks"]
    assert code == (cli.EXIT_OK if summary["passed"] else cli.EXIT_CHECKS_FAILED)
    assert summary["passed"]


def _run(config, out, jobs):
    return subprocess.run(
        [sys.executable, "-m", "heislift", "run", "--config", str(config), "--out", str(out), "--jobs", str(jobs)],
        capture_output=True,
        text=True,
    )


@pytest.mark.slow
def test_golden_run_passes_and_is_byte_identical(tmp_path):
    a = _run(CONFIGS / "golden.json", tmp_path / "a", 1)
    assert a.returncode == 0, a.stderr
    assert all(line.startswith("PASS ") for line in a.stdout.splitlines())
    b = _run(CONFIGS / "golden.json", tmp_path / "b", 4)
    assert b.returncode == 0, b.stderr
    names = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert {str(n) for n in names} >= {
        "cubes.json", "complex.json", "field.json", "quality.json", "summary.json", "reports/p_sweep.csv",
    }
    _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", [str(n) for n in names], shallow=False)
    assert mismatch == [] and errors == []
