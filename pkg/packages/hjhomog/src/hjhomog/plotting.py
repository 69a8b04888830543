from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from hjhomog.errors import ParameterError
from hjhomog.geometry import SublevelGeometry
from hjhomog.grid import GridSpec
from hjhomog.homog import CorrectorReport, EffectiveEstimate

# Fixed ids and no timestamp keep the SVG bytes reproducible.
plt.rcParams["svg.hashsalt"] = "hjhomog"
plt.rcParams["svg.fonttype"] = "none"


def save_svg(figure: plt.Figure, path: Path | str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(target, format="svg", metadata={"Date": None})
    plt.close(figure)
    return target


def plot_field(grid: GridSpec, values: np.ndarray, title: str = "") -> plt.Figure:
    figure, axes = plt.subplots(figsize=(6, 4))
    values = np.asarray(values).reshape(grid.shape)
    if grid.dim == 1:
        axes.plot(grid.coordinates[:, 0], values, lw=1.2)
        axes.set_xlabel("x")
    else:
        image = axes.imshow(
            values.T,
            origin="lower",
            extent=(0.0, grid.extent, 0.0, grid.extent),
            cmap="viridis",
        )
        figure.colorbar(image, ax=axes)
        axes.set_xlabel("x0")
        axes.set_ylabel("x1")
    axes.set_title(title)
    return figure


def plot_convergence(estimate: EffectiveEstimate) -> plt.Figure:
    figure, axes = plt.subplots(figsize=(6, 4))
    deltas = np.asarray(estimate.deltas)
    for row in estimate.per_seed_values:
        axes.plot(deltas, row, color="0.75", lw=0.8)
    axes.errorbar(deltas, estimate.seed_mean, yerr=estimate.seed_dispersion, fmt="o-", color="C0", label="seed mean")
    axes.plot([0.0], [estimate.cbar], "s", color="C3", label=f"extrapolated {estimate.cbar:.5g}")
    axes.set_xlabel("delta")
    axes.set_ylabel("-delta v(0)")
    axes.legend()
    return figure


def plot_profiles(reports: Sequence[tuple[int, CorrectorReport]]) -> plt.Figure:
    figure, axes = plt.subplots(figsize=(6, 4))
    for seed, report in reports:
        radii, ratios = zip(*report.sublinearity_profile)
        axes.loglog(radii, ratios, "o-", lw=1.0, label=f"seed {seed}")
    axes.set_xlabel("R")
    axes.set_ylabel("max |theta~| / R")
    if len(reports) <= 8:
        axes.legend()
    return figure


def plot_level_set(geometry: SublevelGeometry) -> plt.Figure:
    if len(geometry.p) != 2:
        raise ParameterError("level-set plots need a 2D table", key="dim")
    figure, axes = plt.subplots(figsize=(5, 5))
    samples = np.array([q for q, _, _ in geometry.p_samples])
    members = np.array(geometry.member_flags)
    axes.scatter(samples[~members, 0], samples[~members, 1], s=10, color="0.7", label="outside")
    axes.scatter(samples[members, 0], samples[members, 1], s=14, color="C0", label="member")
    if len(geometry.hull_vertices) >= 2:
        hull = np.array(geometry.hull_vertices + geometry.hull_vertices[:1])
        axes.plot(hull[:, 0], hull[:, 1], "-", color="C1", lw=1.0, label="hull")
    if geometry.extreme_points:
        extreme = np.array(geometry.extreme_points)
        axes.scatter(extreme[:, 0], extreme[:, 1], s=40, facecolors="none", edgecolors="C3", label="extreme")
    axes.plot([geometry.p[0]], [geometry.p[1]], "k*", ms=10, label="p")
    axes.set_aspect("equal")
    axes.set_title(f"level {geometry.level:.5g}")
    axes.legend(loc="best", fontsize="small")
    return figure


def plot_csv(path: Path | str, x: str | None = None, y: Sequence[str] = ()) -> plt.Figure:
    """Line plot of numeric CSV columns against the first (or the named) column."""
    frame = pd.read_csv(path)
    numeric = frame.select_dtypes(include="number")
    if numeric.shape[1] < 2:
        raise ParameterError(f"{path} has fewer than two numeric columns", key="csv")
    x = x or numeric.columns[0]
    if x not in numeric.columns:
        raise ParameterError(f"no numeric column named {x!r}", key="x")
    columns = list(y) or [name for name in numeric.columns if name != x]
    figure, axes = plt.subplots(figsize=(6, 4))
    for name in columns:
        if name not in numeric.columns:
            raise ParameterError(f"no numeric column named {name!r}", key="y")
        axes.plot(numeric[x], numeric[name], "o-", ms=3, lw=1.0, label=name)
    axes.set_xlabel(x)
    axes.legend()
    return figure
