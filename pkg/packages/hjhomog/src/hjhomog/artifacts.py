from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from hjhomog.geometry import HbarSample, SublevelGeometry
from hjhomog.grid import GridSpec
from hjhomog.homog import CorrectorReport, EffectiveEstimate, MeanZeroReport

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
PARTIAL_MARKER = "#partial"


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """Output directory that remembers every file written through it."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._written: dict[str, Path] = {}

    @property
    def artifacts(self) -> list[str]:
        return sorted(self._written)

    def path(self, name: str) -> Path:
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def register(self, name: str) -> Path:
        target = self.root / name
        if not target.is_file():
            raise FileNotFoundError(f"artifact {name} was not written")
        self._written[name] = target
        return target

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        frame.to_csv(self.path(name), index=False, lineterminator="\n")
        logger.debug("wrote %s (%d rows)", name, len(frame))
        return self.register(name)

    def write_json(self, name: str, payload: Any) -> Path:
        self.path(name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self.register(name)

    def write_manifest(self, partial_stage: str | None = None) -> Path:
        lines = [f"{name}\t{sha256_file(self._written[name])}" for name in self.artifacts]
        if partial_stage is not None:
            lines.append(f"{PARTIAL_MARKER}\t{partial_stage}")
        target = self.path(MANIFEST_NAME)
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return target


def read_manifest(path: Path | str) -> dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name, _, digest = line.partition("\t")
        entries[name] = digest
    return entries


def read_table(path: Path | str) -> pd.DataFrame:
    return pd.read_csv(path)


def _axis_columns(prefix: str, vectors: np.ndarray) -> dict[str, np.ndarray]:
    vectors = np.atleast_2d(vectors)
    return {f"{prefix}{axis}": vectors[:, axis] for axis in range(vectors.shape[1])}


def field_frame(grid: GridSpec, values: np.ndarray, column: str = "v") -> pd.DataFrame:
    """Rows "index,x0[,x1],<column>" in flat lattice order."""
    points = grid.coordinates.reshape(-1, grid.dim)
    frame = pd.DataFrame({"index": np.arange(grid.size), **_axis_columns("x", points)})
    frame[column] = np.asarray(values, dtype=float).reshape(-1)
    return frame


def solver_log_frame(history: Sequence[tuple[int, float]]) -> pd.DataFrame:
    return pd.DataFrame(list(history), columns=["iter", "residual_sup"])


def estimate_frame(estimate: EffectiveEstimate) -> pd.DataFrame:
    rows = []
    for i, seed in enumerate(estimate.seeds):
        for n, delta in enumerate(estimate.deltas):
            row = {f"p{axis}": float(c) for axis, c in enumerate(estimate.p)}
            row.update(delta=delta, seed=seed, minus_delta_v0=float(estimate.per_seed_values[i, n]))
            rows.append(row)
    return pd.DataFrame(rows)


def summary_frame(estimates: Sequence[EffectiveEstimate]) -> pd.DataFrame:
    rows = []
    for estimate in estimates:
        row = {f"p{axis}": float(c) for axis, c in enumerate(estimate.p)}
        row.update(
            cbar=estimate.cbar,
            extrap_residual=estimate.extrapolation_residual,
            dispersion_final=estimate.dispersion_final,
        )
        rows.append(row)
    return pd.DataFrame(rows)


def profile_frame(reports: Sequence[tuple[int, CorrectorReport]]) -> pd.DataFrame:
    rows = [
        {"seed": seed, "R": R, "max_ratio": ratio}
        for seed, report in reports
        for R, ratio in report.sublinearity_profile
    ]
    return pd.DataFrame(rows, columns=["seed", "R", "max_ratio"])


def corrector_summary_frame(reports: Sequence[tuple[int, CorrectorReport]]) -> pd.DataFrame:
    rows = []
    for seed, report in reports:
        row: dict[str, float | int] = {"seed": seed}
        row.update({f"r{axis}": float(c) for axis, c in enumerate(report.drift)})
        row.update(
            drift_fit_residual=report.drift_fit_residual,
            equation_residual_sup=report.equation_residual_sup,
            cbar_used=report.cbar_used,
        )
        rows.append(row)
    return pd.DataFrame(rows)


def mean_zero_frame(report: MeanZeroReport) -> pd.DataFrame:
    rows = [
        {"check": entry.name, "component": k, "mean": m, "stderr": s, "passed": entry.passed}
        for entry in report.entries
        for k, (m, s) in enumerate(zip(entry.mean, entry.stderr))
    ]
    return pd.DataFrame(rows, columns=["check", "component", "mean", "stderr", "passed"])


def table_frame(table: Sequence[HbarSample]) -> pd.DataFrame:
    rows = []
    for sample in table:
        row = {f"q{axis}": c for axis, c in enumerate(sample.q)}
        row.update(cbar=sample.cbar, uncertainty=sample.uncertainty)
        rows.append(row)
    return pd.DataFrame(rows)


def geometry_frame(geometry: SublevelGeometry) -> pd.DataFrame:
    hull = {tuple(v): flag for v, flag in zip(geometry.hull_vertices, geometry.extreme_flags)}
    rows = []
    for (q, cbar, uncertainty), member in zip(geometry.p_samples, geometry.member_flags):
        row = {f"q{axis}": c for axis, c in enumerate(q)}
        row.update(
            cbar=cbar,
            uncertainty=uncertainty,
            member=member,
            hull_vertex=q in hull,
            extreme=bool(hull.get(q, False)),
        )
        rows.append(row)
    return pd.DataFrame(rows)
