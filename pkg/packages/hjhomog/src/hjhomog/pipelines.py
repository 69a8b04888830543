from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np
import pandas as pd

from hjhomog import __version__
from hjhomog.artifacts import (
    ArtifactStore,
    corrector_summary_frame,
    estimate_frame,
    field_frame,
    geometry_frame,
    mean_zero_frame,
    profile_frame,
    solver_log_frame,
    summary_frame,
    table_frame,
)
from hjhomog.config import ExperimentConfig, ResolvedConfig, load_config
from hjhomog.errors import ParameterError, StageError
from hjhomog.geometry import (
    as_tabulated_hamiltonian,
    momentum_in_hull,
    radial_checks,
    sublevel_extremes,
    tabulate_Hbar,
)
from hjhomog.grid import GridSpec
from hjhomog.homog import (
    convexcase_variance_decay,
    corrector_report,
    extract_corrector,
    mean_zero_checks,
    theta_distance,
    vanishing_discount,
)
from hjhomog.plotting import plot_convergence, plot_field, plot_level_set, plot_profiles, save_svg
from hjhomog.solver import check_assumption_H, solve_discounted, solve_effective, solve_oscillatory

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    experiment: str
    resolved_config: dict[str, Any]
    sources: dict[str, str]
    artifact_version: str
    output_dir: Path
    stages: dict[str, list[str]] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    passed: bool | None = None
    wall_clock_seconds: float = 0.0
    manifest: Path | None = None

    def persisted(self) -> dict[str, Any]:
        """The on-disk record; wall-clock stays out so reruns hash identically."""
        return {
            "experiment": self.experiment,
            "artifact_version": self.artifact_version,
            "stages": self.stages,
            "metrics": self.metrics,
            "passed": self.passed,
        }


class _Pipeline:
    def __init__(self, config: ExperimentConfig, store: ArtifactStore, workers: int) -> None:
        self.config = config
        self.store = store
        self.workers = workers
        self.stages: dict[str, list[str]] = {}
        self.metrics: dict[str, Any] = {}
        self.passed: bool | None = None
        self.current: str | None = None

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        before = set(self.store.artifacts)
        self.current = name
        started = time.perf_counter()
        logger.info("stage %s started", name)
        yield
        self.stages[name] = sorted(set(self.store.artifacts) - before)
        logger.info("stage %s finished in %.2fs", name, time.perf_counter() - started)
        self.current = None

    def table(self, name: str, frame: pd.DataFrame) -> None:
        if self.config.output.csv:
            self.store.write_table(name, frame)

    def figure(self, name: str, build: Callable[[], Any]) -> None:
        if self.config.output.svg:
            save_svg(build(), self.store.path(name))
            self.store.register(name)

    @property
    def grid(self) -> GridSpec:
        return self.config.grid()

    @property
    def momentum(self) -> list[float]:
        return list(self.config.sweep.p)


def _floats(values: Sequence[float] | np.ndarray) -> list[float]:
    return [float(v) for v in np.atleast_1d(values)]


def _env_sample(pipe: _Pipeline) -> None:
    grid = pipe.grid
    with pipe.stage("sample"):
        sample = pipe.config.hamiltonian_spec().build(grid).field
        pipe.table("field.csv", field_frame(grid, sample.values, "value"))
        pipe.metrics.update(
            declared_floor=sample.floor,
            declared_cap=sample.cap,
            min=float(sample.values.min()),
            max=float(sample.values.max()),
            mean=float(sample.values.mean()),
        )
    with pipe.stage("plot"):
        pipe.figure("field.svg", lambda: plot_field(grid, sample.values, sample.spec.family.value))


def _solve(pipe: _Pipeline) -> None:
    cfg = pipe.config
    grid = pipe.grid
    params = cfg.scheme()
    if not cfg.sweep.deltas:
        raise ParameterError("need at least one discount factor", key="sweep.deltas")
    with pipe.stage("solve"):
        H = cfg.hamiltonian_spec().build(grid)
        A = cfg.diffusion_spec().build(grid)
        rows = []
        solution = None
        for delta in cfg.sweep.deltas:
            solution = solve_discounted(H, A, pipe.momentum, delta, grid, params)
            bound = cfg.sweep.C_R if cfg.sweep.C_R is not None else float("inf")
            report = check_assumption_H(solution, bound)
            rows.append(
                {
                    "delta": delta,
                    "minus_delta_v0": -delta * solution.value_at_origin,
                    "iterations": solution.iterations,
                    "residual_sup": solution.residual_sup,
                    "sup_norm_delta_v": report.sup_norm_delta_v,
                    "lipschitz_estimate": report.lipschitz_estimate,
                    "bound": report.bound,
                    "max_abs_H": report.max_abs_H,
                    "passed": report.passed,
                }
            )
        pipe.table("assumption.csv", pd.DataFrame(rows))
        pipe.table("solution.csv", field_frame(grid, solution.v, "v"))
        pipe.table("solver_log.csv", solver_log_frame(solution.residual_history))
        pipe.metrics.update(
            minus_delta_v0=[row["minus_delta_v0"] for row in rows],
            assumption_bound=[row["bound"] for row in rows],
            max_abs_H=rows[-1]["max_abs_H"],
        )
        if cfg.sweep.C_R is not None:
            pipe.passed = all(row["passed"] for row in rows)
    with pipe.stage("plot"):
        pipe.figure("solution.svg", lambda: plot_field(grid, solution.v, f"delta={solution.delta:g}"))


def _homog(pipe: _Pipeline) -> None:
    cfg = pipe.config
    with pipe.stage("homog"):
        estimate = vanishing_discount(
            cfg.hamiltonian_spec(),
            cfg.diffusion_spec(),
            pipe.momentum,
            cfg.sweep.deltas,
            cfg.sweep.seeds,
            pipe.grid,
            cfg.scheme(),
            workers=pipe.workers,
        )
        pipe.table("estimate.csv", estimate_frame(estimate))
        pipe.table("summary.csv", summary_frame([estimate]))
        pipe.metrics.update(
            cbar=estimate.cbar,
            extrapolation_residual=estimate.extrapolation_residual,
            dispersion_final=estimate.dispersion_final,
            a_priori_bound=estimate.a_priori_bound,
        )
    with pipe.stage("plot"):
        pipe.figure("convergence.svg", lambda: plot_convergence(estimate))


def _default_points(grid: GridSpec) -> list[list[float]]:
    quarter = grid.extent / 4
    points = []
    for axis in range(grid.dim):
        for sign in (1.0, -1.0):
            point = [0.0] * grid.dim
            point[axis] = sign * quarter
            points.append(point)
    return points


def _corrector(pipe: _Pipeline) -> None:
    cfg = pipe.config
    grid = pipe.grid
    params = cfg.scheme()
    H_spec, A_spec = cfg.hamiltonian_spec(), cfg.diffusion_spec()
    seeds = [int(seed) for seed in cfg.sweep.seeds]
    with pipe.stage("homog"):
        estimate = vanishing_discount(
            H_spec, A_spec, pipe.momentum, cfg.sweep.deltas, seeds, grid, params, workers=pipe.workers, keep_final=True
        )
        pipe.table("summary.csv", summary_frame([estimate]))
    with pipe.stage("correctors"):
        reports = []
        for seed, solution in zip(sorted(seeds), estimate.final_solutions or ()):
            H, A = H_spec.build(grid, seed), A_spec.build(grid, seed)
            reports.append((seed, corrector_report(H, A, pipe.momentum, solution, estimate.cbar, grid, params)))
        pipe.table("corrector_profile.csv", profile_frame(reports))
        pipe.table("corrector_summary.csv", corrector_summary_frame(reports))
        first_seed, first_report = reports[0]
        pipe.table("theta.csv", field_frame(grid, first_report.theta_tilde, "theta_tilde"))
    with pipe.stage("stability"):
        H, A = H_spec.build(grid, first_seed), A_spec.build(grid, first_seed)
        previous = solve_discounted(H, A, pipe.momentum, cfg.sweep.deltas[-2], grid, params)
        final = estimate.final_solutions[0]
        distance = theta_distance(extract_corrector(previous), extract_corrector(final), grid)
    with pipe.stage("mean-zero"):
        thetas = [extract_corrector(solution) for solution in estimate.final_solutions]
        mean_zero = mean_zero_checks(
            thetas,
            cfg.sweep.points or _default_points(grid),
            grid,
            drifts=[report.drift for _, report in reports],
            min_seeds=cfg.sweep.min_seeds,
        )
        pipe.table("mean_zero.csv", mean_zero_frame(mean_zero))
        shifted = [report.shifted_momentum for _, report in reports]
        pipe.metrics.update(
            cbar=estimate.cbar,
            drift_mean=_floats(np.mean([report.drift for _, report in reports], axis=0)),
            equation_residual_sup=max(report.equation_residual_sup for _, report in reports),
            theta_distance=distance,
            mean_zero_status=mean_zero.status,
            momentum_in_hull=momentum_in_hull(pipe.momentum, shifted),
        )
    with pipe.stage("plot"):
        pipe.figure("profile.svg", lambda: plot_profiles(reports))


def _default_p_grid(dim: int) -> list[list[float]]:
    axis = np.linspace(-2.0, 2.0, 9)
    if dim == 1:
        return [[float(q)] for q in axis]
    return [[float(a), float(b)] for a in axis for b in axis]


def _tabulate(pipe: _Pipeline, p_grid: Sequence[Sequence[float]]):
    cfg = pipe.config
    return tabulate_Hbar(
        cfg.hamiltonian_spec(),
        cfg.diffusion_spec(),
        p_grid,
        cfg.sweep.deltas,
        cfg.sweep.seeds,
        pipe.grid,
        cfg.scheme(),
        workers=pipe.workers,
    )


def _geometry(pipe: _Pipeline) -> None:
    with pipe.stage("tabulate"):
        table = _tabulate(pipe, pipe.config.sweep.p_grid or _default_p_grid(pipe.grid.dim))
        pipe.table("table.csv", table_frame(table))
    with pipe.stage("hull"):
        geometry = sublevel_extremes(table, pipe.momentum)
        pipe.table("geometry.csv", geometry_frame(geometry))
        pipe.metrics.update(
            level=geometry.level,
            members=sum(geometry.member_flags),
            extreme_points=len(geometry.extreme_points),
            flat_arc_points=len(geometry.flat_arc_points),
            degenerate=geometry.degenerate,
            p_is_extreme=geometry.p_is_extreme,
        )
    if pipe.grid.dim == 2:
        with pipe.stage("plot"):
            pipe.figure("level_set.svg", lambda: plot_level_set(geometry))


def radial_p_grid(dim: int, directions: int, radii: Sequence[float]) -> list[list[float]]:
    if dim == 1:
        return [[sign * float(s)] for sign in (1.0, -1.0) for s in radii]
    angles = 2.0 * np.pi * np.arange(directions) / directions
    return [[float(s * np.cos(a)), float(s * np.sin(a))] for a in angles for s in radii]


def _verify_radial(pipe: _Pipeline) -> None:
    sweep = pipe.config.sweep
    with pipe.stage("tabulate"):
        table = _tabulate(pipe, radial_p_grid(pipe.grid.dim, sweep.directions, sweep.radii))
        pipe.table("table.csv", table_frame(table))
    with pipe.stage("radial"):
        homogeneous = pipe.config.hamiltonian.family == "Eikonal"
        report = radial_checks(table, homogeneous=homogeneous)
        summary = {
            "directions": report.directions,
            "spread": report.spread,
            "spread_passed": report.spread_passed,
            "monotone_passed": report.monotone_passed,
            "slope": report.slope,
            "fit_residual": report.fit_residual,
            "fit_passed": report.fit_passed,
            "witness": json.dumps(report.witness, sort_keys=True) if report.witness else "",
        }
        pipe.table("radial.csv", pd.DataFrame([summary]))
        pipe.metrics.update({key: value for key, value in summary.items() if key != "witness"})
        pipe.metrics["witness"] = report.witness
        pipe.passed = report.passed


def _verify_convex(pipe: _Pipeline) -> None:
    cfg = pipe.config
    with pipe.stage("variance"):
        report = convexcase_variance_decay(
            cfg.hamiltonian_spec(),
            cfg.diffusion_spec(),
            pipe.momentum,
            cfg.sweep.deltas,
            cfg.sweep.seeds,
            pipe.grid,
            cfg.scheme(),
            threshold=cfg.sweep.threshold,
            workers=pipe.workers,
        )
        frame = pd.DataFrame(
            {"delta": report.deltas, "seed_mean": report.estimate.seed_mean, "dispersion": report.dispersion}
        )
        pipe.table("variance.csv", frame)
        pipe.metrics.update(
            dispersion=list(report.dispersion),
            monotone=report.monotone,
            final_ok=report.final_ok,
            cbar=report.estimate.cbar,
        )
        pipe.passed = report.passed


def periodic_cone(grid: GridSpec) -> np.ndarray:
    """Torus distance to the box centre."""
    offset = grid.coordinates - grid.extent / 2
    offset -= grid.extent * np.round(offset / grid.extent)
    return np.linalg.norm(offset, axis=-1)


def _oscillatory(pipe: _Pipeline) -> None:
    cfg = pipe.config
    osc = cfg.oscillatory
    grid = pipe.grid
    params = cfg.scheme()
    with pipe.stage("tabulate"):
        nodes = np.linspace(-osc.hbar_range, osc.hbar_range, osc.hbar_nodes)
        if grid.dim == 1:
            p_grid = [[float(q)] for q in nodes]
        else:
            p_grid = [[float(a), float(b)] for a in nodes for b in nodes]
        table = _tabulate(pipe, p_grid)
        hbar = as_tabulated_hamiltonian(table)
        pipe.table("table.csv", table_frame(table))
    macro = GridSpec(dim=grid.dim, extent=osc.extent, spacing=osc.spacing)
    u0 = periodic_cone(macro)
    with pipe.stage("effective"):
        effective = solve_effective(hbar, u0, osc.horizon, macro, params)
        pipe.table("effective.csv", field_frame(macro, effective.final, "u"))
    with pipe.stage("oscillatory"):
        H = cfg.hamiltonian_spec().build(grid)
        A = cfg.diffusion_spec().build(grid)
        rows = []
        for epsilon in osc.epsilons:
            solution = solve_oscillatory(H, A, epsilon, u0, osc.horizon, macro, params)
            gap = float(np.max(np.abs(solution.final - effective.final)))
            rows.append({"epsilon": epsilon, "sup_gap": gap})
            logger.info("epsilon=%g sup gap %.4g", epsilon, gap)
        pipe.table("oscillatory.csv", pd.DataFrame(rows))
        gaps = [row["sup_gap"] for row in rows]
        pipe.metrics.update(epsilons=list(osc.epsilons), sup_gaps=gaps)
        pipe.passed = all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    with pipe.stage("plot"):
        pipe.figure("effective.svg", lambda: plot_field(macro, effective.final, f"T={osc.horizon:g}"))


EXPERIMENT_HANDLERS: dict[str, Callable[[_Pipeline], None]] = {
    "env-sample": _env_sample,
    "solve": _solve,
    "homog": _homog,
    "corrector": _corrector,
    "geometry": _geometry,
    "verify-radial": _verify_radial,
    "verify-convex": _verify_convex,
    "oscillatory": _oscillatory,
}


def run_config(resolved: ResolvedConfig, *, workers: int = 1, output: Path | str | None = None) -> RunRecord:
    """Execute one resolved experiment and persist its artifacts and manifest."""
    config = resolved.config
    directory = Path(output) if output is not None else Path(config.output.directory)
    store = ArtifactStore(directory)
    store.write_json("resolved_config.json", resolved.resolved_payload())
    store.write_json("config_sources.json", resolved.sources)
    pipe = _Pipeline(config, store, workers)
    started = time.perf_counter()
    logger.info("running %s into %s", config.experiment, directory)
    try:
        EXPERIMENT_HANDLERS[config.experiment](pipe)
    except Exception as exc:
        stage = pipe.current or "setup"
        store.write_manifest(partial_stage=stage)
        raise StageError(stage, exc) from exc
    record = RunRecord(
        experiment=config.experiment,
        resolved_config=resolved.resolved_payload(),
        sources=resolved.sources,
        artifact_version=__version__,
        output_dir=directory,
        stages=pipe.stages,
        metrics=pipe.metrics,
        passed=pipe.passed,
        wall_clock_seconds=time.perf_counter() - started,
    )
    store.write_json("run_record.json", record.persisted())
    record.manifest = store.write_manifest()
    logger.info("%s finished in %.1fs", config.experiment, record.wall_clock_seconds)
    return record


def run(
    config_path: Path | str,
    overrides: Sequence[str] = (),
    *,
    workers: int = 1,
    output: Path | str | None = None,
) -> RunRecord:
    return run_config(load_config(config_path, overrides), workers=workers, output=output)
