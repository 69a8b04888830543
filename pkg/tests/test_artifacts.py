from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from hjhomog.artifacts import (
    MANIFEST_NAME,
    PARTIAL_MARKER,
    ArtifactStore,
    field_frame,
    geometry_frame,
    read_manifest,
    read_table,
    solver_log_frame,
    table_frame,
)
from hjhomog.geometry import HbarSample, sublevel_extremes
from hjhomog.grid import GridSpec


def test_manifest_lists_sorted_paths_with_sha256(tmp_path: Path) -> None:
    store = ArtifactStore(tmp_path / "run")
    store.write_table("b.csv", pd.DataFrame({"x": [1, 2]}))
    store.write_json("a/config.json", {"z": 1, "a": 2})
    manifest = store.write_manifest()
    lines = manifest.read_text(encoding="utf-8").splitlines()
    assert [line.split("\t")[0] for line in lines] == ["a/config.json", "b.csv"]
    digest = hashlib.sha256((tmp_path / "run" / "b.csv").read_bytes()).hexdigest()
    assert read_manifest(manifest)["b.csv"] == digest
    assert (tmp_path / "run" / "a" / "config.json").read_text(encoding="utf-8").startswith('{\n  "a": 2')


def test_partial_manifest_names_the_failed_stage(tmp_path: Path) -> None:
    store = ArtifactStore(tmp_path)
    store.write_table("field.csv", pd.DataFrame({"v": [0.0]}))
    manifest = store.write_manifest(partial_stage="solve")
    assert manifest.name == MANIFEST_NAME
    assert manifest.read_text(encoding="utf-8").splitlines()[-1] == f"{PARTIAL_MARKER}\tsolve"


def test_register_requires_an_existing_file(tmp_path: Path) -> None:
    store = ArtifactStore(tmp_path)
    with pytest.raises(FileNotFoundError):
        store.register("missing.svg")


def test_field_frame_layout(tmp_path: Path) -> None:
    grid = GridSpec(dim=2, extent=1.0, spacing=0.125)
    values = np.arange(grid.size, dtype=float).reshape(grid.shape)
    frame = field_frame(grid, values, "theta")
    assert list(frame.columns) == ["index", "x0", "x1", "theta"]
    assert frame.loc[9, ["x0", "x1", "theta"]].tolist() == [0.125, 0.125, 9.0]

    store = ArtifactStore(tmp_path)
    store.write_table("theta.csv", frame)
    again = read_table(tmp_path / "theta.csv")
    assert np.array_equal(again["theta"].to_numpy(), values.reshape(-1))


def test_solver_log_and_table_frames() -> None:
    log = solver_log_frame(((0, 2.0), (10, 1e-3)))
    assert list(log.columns) == ["iter", "residual_sup"]
    table = [HbarSample(q=(0.5,), cbar=1.0, uncertainty=0.01), HbarSample(q=(1.0,), cbar=2.0, uncertainty=0.02)]
    frame = table_frame(table)
    assert list(frame.columns) == ["q0", "cbar", "uncertainty"]
    assert frame["cbar"].tolist() == [1.0, 2.0]


def test_geometry_frame_marks_hull_and_extreme_points() -> None:
    points = [(float(a), float(b)) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    table = [HbarSample(q=q, cbar=max(abs(q[0]), abs(q[1])), uncertainty=0.0) for q in points]
    frame = geometry_frame(sublevel_extremes(table, [1.0, 0.0]))
    assert list(frame.columns) == ["q0", "q1", "cbar", "uncertainty", "member", "hull_vertex", "extreme"]
    assert frame["member"].all()
    assert frame["hull_vertex"].sum() == 4
    assert frame["extreme"].sum() == 4
