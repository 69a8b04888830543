from __future__ import annotations

import json
from pathlib import Path

import pytest

from hjhomog.artifacts import PARTIAL_MARKER, read_manifest
from hjhomog.config import resolve_config
from hjhomog.errors import ConfigError, NonconvergenceError, StageError
from hjhomog.pipelines import periodic_cone, radial_p_grid, run, run_config
from hjhomog.grid import GridSpec

REPO_ROOT = Path(__file__).resolve().parents[1]

CONSTANT_HOMOG = {
    "experiment": "homog",
    "environment": {"family": "RandomPhaseTrig", "params": {"level": 2.0, "amplitudes": [0.0], "frequencies": [1.0]}},
    "hamiltonian": {"family": "Eikonal"},
    "numerics": {"dim": 1, "extent": 1.0, "spacing": 0.125, "stop_tol": 1e-10},
    "sweep": {"p": [1.0], "deltas": [0.5, 0.25, 0.125], "seeds": [0, 1]},
}


def _write(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def test_homog_run_writes_record_and_manifest(tmp_path: Path) -> None:
    record = run_config(resolve_config(CONSTANT_HOMOG), output=tmp_path / "out")
    assert record.metrics["cbar"] == pytest.approx(2.0, abs=1e-8)
    assert record.passed is None
    assert set(record.stages) == {"homog", "plot"}
    assert record.stages["homog"] == ["estimate.csv", "summary.csv"]
    entries = read_manifest(record.manifest)
    assert set(entries) == {
        "config_sources.json",
        "convergence.svg",
        "estimate.csv",
        "resolved_config.json",
        "run_record.json",
        "summary.csv",
    }
    persisted = json.loads((tmp_path / "out" / "run_record.json").read_text(encoding="utf-8"))
    assert "wall_clock_seconds" not in persisted
    assert persisted["artifact_version"] == record.artifact_version


def test_reruns_produce_identical_manifests(tmp_path: Path) -> None:
    resolved = resolve_config(CONSTANT_HOMOG)
    first = run_config(resolved, output=tmp_path / "a")
    second = run_config(resolved, output=tmp_path / "b", workers=2)
    assert first.manifest.read_text(encoding="utf-8") == second.manifest.read_text(encoding="utf-8")


def test_csv_and_svg_can_be_switched_off(tmp_path: Path) -> None:
    resolved = resolve_config(CONSTANT_HOMOG, ["output.svg=false", "output.csv=false"])
    record = run_config(resolved, output=tmp_path)
    assert set(read_manifest(record.manifest)) == {"config_sources.json", "resolved_config.json", "run_record.json"}


def test_env_sample_writes_field_and_figure(tmp_path: Path) -> None:
    record = run(REPO_ROOT / "data" / "configs" / "env-sample-bumps-2d.json", output=tmp_path)
    assert {"field.csv", "field.svg"} <= set(read_manifest(record.manifest))
    assert record.metrics["declared_floor"] <= record.metrics["min"] <= record.metrics["max"]
    assert record.metrics["max"] <= record.metrics["declared_cap"]


def test_solve_reports_the_assumption_bound(tmp_path: Path) -> None:
    payload = {**CONSTANT_HOMOG, "experiment": "solve", "sweep": {"p": [1.0], "deltas": [0.5, 0.25], "C_R": 6.0}}
    record = run_config(resolve_config(payload), output=tmp_path)
    assert record.passed is True
    assert record.metrics["minus_delta_v0"] == pytest.approx([2.0, 2.0], abs=1e-8)
    assert record.stages["solve"] == ["assumption.csv", "solution.csv", "solver_log.csv"]


def test_unknown_key_is_rejected_before_anything_runs(tmp_path: Path) -> None:
    payload = json.loads(json.dumps(CONSTANT_HOMOG))
    payload["numerics"]["speeed"] = 2
    with pytest.raises(ConfigError, match="speeed"):
        run(_write(tmp_path, payload), output=tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_failure_leaves_a_partial_manifest(tmp_path: Path) -> None:
    payload = {**CONSTANT_HOMOG, "experiment": "solve"}
    resolved = resolve_config(payload, ["numerics.max_iters=2"])
    with pytest.raises(StageError) as info:
        run_config(resolved, output=tmp_path)
    assert info.value.stage == "solve"
    assert isinstance(info.value.cause, NonconvergenceError)
    lines = (tmp_path / "manifest.txt").read_text(encoding="utf-8").splitlines()
    assert lines[-1] == f"{PARTIAL_MARKER}\tsolve"
    assert [line.split("\t")[0] for line in lines[:-1]] == ["config_sources.json", "resolved_config.json"]


def test_radial_p_grid_layout() -> None:
    assert radial_p_grid(1, 8, [0.5, 1.0]) == [[0.5], [1.0], [-0.5], [-1.0]]
    grid = radial_p_grid(2, 4, [1.0])
    assert grid[0] == [1.0, 0.0]
    assert grid[2] == pytest.approx([-1.0, 0.0])


def test_periodic_cone_peaks_at_the_corners() -> None:
    grid = GridSpec(dim=1, extent=1.0, spacing=0.25)
    assert periodic_cone(grid).tolist() == [0.5, 0.25, 0.0, 0.25]
