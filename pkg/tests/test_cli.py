from __future__ import annotations

import json
from pathlib import Path

import pytest

from hjhomog.cli import EXIT_CHECK_FAILED, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_USAGE, main

CONSTANT_SOLVE = {
    "experiment": "solve",
    "environment": {"family": "RandomPhaseTrig", "params": {"level": 2.0, "amplitudes": [0.0], "frequencies": [1.0]}},
    "hamiltonian": {"family": "Eikonal"},
    "numerics": {"dim": 1, "extent": 1.0, "spacing": 0.125, "stop_tol": 1e-10},
    "sweep": {"p": [1.0], "deltas": [0.5, 0.25]},
}


def _config(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def test_run_prints_a_json_summary(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["run", str(_config(tmp_path, CONSTANT_SOLVE)), "--output", str(tmp_path / "out")])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["ok"] is True
    assert summary["experiment"] == "solve"
    assert summary["metrics"]["minus_delta_v0"] == pytest.approx([2.0, 2.0], abs=1e-8)
    assert (tmp_path / "out" / "manifest.txt").is_file()


def test_failed_check_exits_one(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _config(tmp_path, CONSTANT_SOLVE)
    code = main(["run", str(config), "--set", "sweep.C_R=1.0", "--output", str(tmp_path / "out")])
    assert code == EXIT_CHECK_FAILED
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_config_error_exits_two(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    payload = {**CONSTANT_SOLVE, "numerics": {"dim": 1, "speeed": 1}}
    code = main(["run", str(_config(tmp_path, payload))])
    assert code == EXIT_USAGE
    assert "numerics.speeed" in capsys.readouterr().err


def test_missing_config_exits_two(tmp_path: Path) -> None:
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_USAGE


def test_nonconvergence_exits_three(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _config(tmp_path, CONSTANT_SOLVE)
    code = main(["run", str(config), "--set", "numerics.max_iters=2", "--output", str(tmp_path / "out")])
    assert code == EXIT_NONCONVERGENCE
    assert "stage 'solve'" in capsys.readouterr().err


def test_usage_errors_come_from_argparse() -> None:
    with pytest.raises(SystemExit) as info:
        main(["verify", "no-such-suite"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["run", "config.json", "--jobs", "0"])
    assert info.value.code == 2


def test_plot_writes_an_svg(tmp_path: Path) -> None:
    csv = tmp_path / "table.csv"
    csv.write_text("delta,cbar\n0.2,1.5\n0.1,1.6\n0.05,1.65\n", encoding="utf-8")
    out = tmp_path / "figures" / "table.svg"
    assert main(["plot", str(csv), "--out", str(out), "--y", "cbar"]) == EXIT_OK
    assert out.read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_plot_rejects_unknown_columns(tmp_path: Path) -> None:
    csv = tmp_path / "table.csv"
    csv.write_text("delta,cbar\n0.2,1.5\n", encoding="utf-8")
    assert main(["plot", str(csv), "--out", str(tmp_path / "x.svg"), "--x", "missing"]) == EXIT_USAGE
