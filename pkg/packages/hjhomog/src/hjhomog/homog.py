from __future__ import annotations

import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Sequence

import numpy as np

from hjhomog.errors import GeometryError, NonconvergenceError, NotApplicableError, ParameterError
from hjhomog.grid import GridSpec
from hjhomog.models import DiffusionFamily, DiffusionModel, DiffusionSpec, HamiltonianModel, HamiltonianSpec
from hjhomog.solver import DiscountedSolution, SchemeParams, build_discounted_scheme, solve_discounted

logger = logging.getLogger(__name__)

EXTRAPOLATION_WINDOW = 3
MIN_MEAN_ZERO_SEEDS = 8
INSUFFICIENT_SEEDS = "insufficient seeds"


@dataclass(frozen=True, eq=False)
class EffectiveEstimate:
    """Seed ensemble of -delta v(0) over a decreasing delta sequence, extrapolated to delta = 0."""

    p: np.ndarray
    deltas: tuple[float, ...]
    seeds: tuple[int, ...]
    per_seed_values: np.ndarray
    cbar: float
    extrapolation_slope: float
    extrapolation_residual: float
    seed_mean: tuple[float, ...]
    seed_dispersion: tuple[float, ...]
    a_priori_bound: float
    iterations: np.ndarray
    final_solutions: tuple[DiscountedSolution, ...] | None = field(default=None, repr=False)

    @property
    def dispersion_final(self) -> float:
        return self.seed_dispersion[-1]

    @property
    def uncertainty(self) -> float:
        return self.extrapolation_residual + self.dispersion_final


def a_priori_bound(H: HamiltonianModel, p: Sequence[float] | float) -> float:
    """Stand-in for the bound on |delta v(0)|: max over the lattice of |H(p, x)|."""
    return H.a_priori_bound(p)


def _check_deltas(deltas: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(delta) for delta in deltas)
    if len(values) < 2:
        raise ParameterError("need at least 2 discount factors", key="deltas")
    if any(delta <= 0 for delta in values):
        raise ParameterError("discount factors must be > 0", key="deltas")
    if any(later >= earlier for earlier, later in zip(values, values[1:])):
        raise ParameterError("discount factors must be strictly decreasing", key="deltas")
    return values


def _check_seeds(seeds: Sequence[int]) -> tuple[int, ...]:
    values = tuple(int(seed) for seed in seeds)
    if not values:
        raise ParameterError("need at least one seed", key="seeds")
    if len(set(values)) != len(values):
        raise ParameterError("seeds must be distinct", key="seeds")
    return values


@dataclass(frozen=True)
class _SolveJob:
    """One seed's decreasing discount sequence; each solve warm-starts from the previous one."""

    hamiltonian: HamiltonianSpec
    diffusion: DiffusionSpec
    p: tuple[float, ...]
    deltas: tuple[float, ...]
    seed: int
    grid: GridSpec
    params: SchemeParams
    keep: bool


@dataclass(frozen=True, eq=False)
class _SolveOutcome:
    seed: int
    delta: float
    value: float
    iterations: int
    a_priori_bound: float
    solution: DiscountedSolution | None = None
    failure: str | None = None
    history: tuple[tuple[int, float], ...] = ()

    def raise_failure(self) -> None:
        if self.failure is not None:
            raise NonconvergenceError(
                self.failure,
                iterations=self.iterations,
                residual_history=self.history,
            ).annotate(seed=self.seed, delta=self.delta)


def _run_job(job: _SolveJob) -> list[_SolveOutcome]:
    H = job.hamiltonian.build(job.grid, job.seed)
    A = job.diffusion.build(job.grid, job.seed)
    outcomes = []
    previous: DiscountedSolution | None = None
    for delta in job.deltas:
        initial = None if previous is None else previous.warm_start(delta)
        try:
            sol = solve_discounted(H, A, job.p, delta, job.grid, job.params, initial=initial)
        except NonconvergenceError as exc:
            outcomes.append(
                _SolveOutcome(
                    seed=job.seed,
                    delta=delta,
                    value=float("nan"),
                    iterations=exc.iterations,
                    a_priori_bound=H.a_priori_bound(job.p),
                    failure=str(exc),
                    history=tuple(exc.residual_history),
                )
            )
            previous = None
            continue
        outcomes.append(
            _SolveOutcome(
                seed=job.seed,
                delta=delta,
                value=-delta * sol.value_at_origin,
                iterations=sol.iterations,
                a_priori_bound=sol.a_priori_bound,
                solution=sol if job.keep and delta == job.deltas[-1] else None,
            )
        )
        previous = sol
    return outcomes


def run_jobs(jobs: Sequence[_SolveJob], workers: int = 1) -> list[_SolveOutcome]:
    """Run seed chains serially or on a process pool; results come back sorted by (seed, delta desc)."""
    if workers > 1 and len(jobs) > 1:
        with Pool(min(workers, len(jobs))) as pool:
            chains = pool.map(_run_job, jobs)
    else:
        chains = []
        for job in jobs:
            chain = _run_job(job)
            for outcome in chain:
                outcome.raise_failure()
            chains.append(chain)
    outcomes = [outcome for chain in chains for outcome in chain]
    return sorted(outcomes, key=lambda item: (item.seed, -item.delta))


def extrapolate(deltas: Sequence[float], means: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit m(delta) = cbar + k delta over the trailing window; returns (cbar, k, max deviation)."""
    x = np.asarray(deltas[-EXTRAPOLATION_WINDOW:], dtype=float)
    y = np.asarray(means[-EXTRAPOLATION_WINDOW:], dtype=float)
    k, cbar = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (cbar + k * x))))
    return float(cbar), float(k), residual


def vanishing_discount(
    H: HamiltonianSpec,
    A: DiffusionSpec,
    p: Sequence[float] | float,
    deltas: Sequence[float],
    seeds: Sequence[int],
    grid: GridSpec,
    params: SchemeParams,
    *,
    workers: int = 1,
    keep_final: bool = False,
) -> EffectiveEstimate:
    deltas = _check_deltas(deltas)
    seeds = tuple(sorted(_check_seeds(seeds)))
    momentum = tuple(float(c) for c in np.atleast_1d(np.asarray(p, dtype=float)))
    jobs = [
        _SolveJob(
            hamiltonian=H,
            diffusion=A,
            p=momentum,
            deltas=deltas,
            seed=seed,
            grid=grid,
            params=params,
            keep=keep_final,
        )
        for seed in seeds
    ]
    logger.info("vanishing discount p=%s: %d seeds x %d deltas", list(momentum), len(seeds), len(deltas))
    outcomes = run_jobs(jobs, workers)
    for outcome in outcomes:
        outcome.raise_failure()

    values = np.array([outcome.value for outcome in outcomes]).reshape(len(seeds), len(deltas))
    iterations = np.array([outcome.iterations for outcome in outcomes]).reshape(len(seeds), len(deltas))
    means = values.mean(axis=0)
    dispersion = values.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(len(deltas))
    cbar, slope, residual = extrapolate(deltas, means)
    finals = tuple(outcome.solution for outcome in outcomes if outcome.solution is not None) if keep_final else None
    logger.info("p=%s cbar=%.6g extrapolation residual=%.2e", list(momentum), cbar, residual)
    return EffectiveEstimate(
        p=np.asarray(momentum),
        deltas=deltas,
        seeds=seeds,
        per_seed_values=values,
        cbar=cbar,
        extrapolation_slope=slope,
        extrapolation_residual=residual,
        seed_mean=tuple(float(m) for m in means),
        seed_dispersion=tuple(float(s) for s in dispersion),
        a_priori_bound=max(outcome.a_priori_bound for outcome in outcomes),
        iterations=iterations,
        final_solutions=finals,
    )


def extract_corrector(sol: DiscountedSolution) -> np.ndarray:
    """theta(x) = v(x) - v(0)."""
    return sol.v - sol.value_at_origin


def _outer_shells(grid: GridSpec) -> np.ndarray:
    radius = grid.sup_radius
    half = grid.extent / 2
    return (radius >= grid.extent / 4 - 1e-12) & (radius < half - 1e-12)


def estimate_drift(theta: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, float]:
    """Least-squares slope r of theta(x) ~ r . x_tilde on the outer shells L/4 <= |x_tilde|_inf < L/2."""
    mask = _outer_shells(grid)
    design = grid.displacements[mask]
    target = np.asarray(theta, dtype=float).reshape(grid.shape)[mask]
    if design.shape[0] < grid.dim or np.linalg.matrix_rank(design) < grid.dim:
        raise GeometryError(f"drift fit is degenerate on {design.shape[0]} shell points")
    r, *_ = np.linalg.lstsq(design, target, rcond=None)
    misfit = target - design @ r
    fit_residual = float(np.sqrt(np.mean(misfit**2)) / grid.extent)
    return r, fit_residual


def theta_distance(theta_a: np.ndarray, theta_b: np.ndarray, grid: GridSpec) -> float:
    """sup_x |theta_a - theta_b| / (1 + |x_tilde|^2)."""
    weight = 1.0 + np.sum(grid.displacements**2, axis=-1)
    return float(np.max(np.abs(np.asarray(theta_a) - np.asarray(theta_b)) / weight))


def profile_radii(grid: GridSpec) -> tuple[float, ...]:
    """Shell radii L/16, L/8, L/4 and L/2 - h, snapped to the lattice."""
    h = grid.spacing
    L = grid.extent
    radii = []
    for target in (L / 16, L / 8, L / 4, L / 2 - h):
        snapped = max(1, round(target / h)) * h
        if not radii or snapped > radii[-1] + 1e-12:
            radii.append(snapped)
    return tuple(radii)


def sublinearity_profile(theta_tilde: np.ndarray, grid: GridSpec) -> tuple[tuple[float, float], ...]:
    radius = grid.sup_radius
    profile = []
    for R in profile_radii(grid):
        shell = np.abs(radius - R) < 0.5 * grid.spacing
        profile.append((R, float(np.max(np.abs(theta_tilde[shell])) / R)))
    return tuple(profile)


@dataclass(frozen=True, eq=False)
class CorrectorReport:
    p: np.ndarray
    drift: np.ndarray
    drift_fit_residual: float
    sublinearity_profile: tuple[tuple[float, float], ...]
    equation_residual_sup: float
    cbar_used: float
    shifted_momentum: np.ndarray
    theta_tilde: np.ndarray = field(repr=False)


def corrector_report(
    H: HamiltonianModel,
    A: DiffusionModel,
    p: Sequence[float] | float,
    delta_min_solution: DiscountedSolution,
    cbar: float,
    grid: GridSpec,
    params: SchemeParams,
) -> CorrectorReport:
    """Shift the corrector by its drift and measure the residual of the corrector equation at p + r."""
    momentum = np.atleast_1d(np.asarray(p, dtype=float))
    theta = extract_corrector(delta_min_solution)
    r, fit_residual = estimate_drift(theta, grid)
    theta_tilde = theta - grid.displacements @ r
    shifted = momentum + r
    scheme = build_discounted_scheme(H, A, momentum, delta_min_solution.delta, grid, params)
    scheme = scheme.with_direction(theta, shifted, slope=r)
    residual = scheme.operator(theta, 0.0, shifted, slope=r) - cbar
    return CorrectorReport(
        p=momentum,
        drift=r,
        drift_fit_residual=fit_residual,
        sublinearity_profile=sublinearity_profile(theta_tilde, grid),
        equation_residual_sup=float(np.max(np.abs(residual))),
        cbar_used=float(cbar),
        shifted_momentum=shifted,
        theta_tilde=theta_tilde,
    )


@dataclass(frozen=True)
class MeanZeroEntry:
    name: str
    mean: tuple[float, ...]
    stderr: tuple[float, ...]
    passed: bool


@dataclass(frozen=True)
class MeanZeroReport:
    seeds: int
    status: str
    entries: tuple[MeanZeroEntry, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _mean_entry(name: str, samples: np.ndarray) -> MeanZeroEntry:
    samples = samples.reshape(samples.shape[0], -1)
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    passed = bool(np.all(np.abs(mean) <= 3.0 * stderr + 1e-15))
    return MeanZeroEntry(
        name=name,
        mean=tuple(float(m) for m in mean),
        stderr=tuple(float(s) for s in stderr),
        passed=passed,
    )


def _lattice_index(grid: GridSpec, x: Sequence[float] | float) -> tuple[int, ...]:
    point = np.atleast_1d(np.asarray(x, dtype=float)).reshape(grid.dim)
    steps = np.rint(grid.wrap(point) / grid.spacing).astype(int) % grid.points_per_axis
    return tuple(int(k) for k in steps)


def mean_zero_checks(
    thetas: Sequence[np.ndarray],
    points: Sequence[Sequence[float] | float],
    grid: GridSpec,
    drifts: Sequence[np.ndarray] | None = None,
    *,
    min_seeds: int = MIN_MEAN_ZERO_SEEDS,
) -> MeanZeroReport:
    """Seed means of theta(x) at the points and of the drift r, each against 3 standard errors."""
    count = len(thetas)
    if count < max(2, min_seeds):
        return MeanZeroReport(seeds=count, status=INSUFFICIENT_SEEDS)
    stack = np.stack([np.asarray(theta, dtype=float).reshape(grid.shape) for theta in thetas])
    entries = []
    for x in points:
        index = _lattice_index(grid, x)
        label = ",".join(f"{float(c):g}" for c in np.atleast_1d(x))
        entries.append(_mean_entry(f"theta({label})", stack[(slice(None), *index)]))
    if drifts is None:
        drifts = [estimate_drift(theta, grid)[0] for theta in stack]
    entries.append(_mean_entry("drift", np.stack([np.atleast_1d(r) for r in drifts])))
    status = "pass" if all(entry.passed for entry in entries) else "fail"
    return MeanZeroReport(seeds=count, status=status, entries=tuple(entries))


@dataclass(frozen=True, eq=False)
class VarianceDecayReport:
    deltas: tuple[float, ...]
    dispersion: tuple[float, ...]
    threshold: float
    monotone: bool
    final_ok: bool
    estimate: EffectiveEstimate = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.monotone and self.final_ok


def convexcase_variance_decay(
    H: HamiltonianSpec,
    A: DiffusionSpec,
    p: Sequence[float] | float,
    deltas: Sequence[float],
    seeds: Sequence[int],
    grid: GridSpec,
    params: SchemeParams,
    *,
    threshold: float,
    slack: float = 0.1,
    workers: int = 1,
) -> VarianceDecayReport:
    """Seed dispersion of -delta v(0) should shrink along the delta sequence for convex H."""
    sample = H.build(grid, int(seeds[0]) if len(seeds) else 0)
    if not sample.convex_in_p:
        raise NotApplicableError(f"{sample.family.value} is not convex in p")
    if DiffusionFamily(A.family) not in (DiffusionFamily.ZERO, DiffusionFamily.ISOTROPIC):
        raise NotApplicableError(f"diffusion {DiffusionFamily(A.family).value} depends on p")
    estimate = vanishing_discount(H, A, p, deltas, seeds, grid, params, workers=workers)
    dispersion = estimate.seed_dispersion
    monotone = all(later <= (1.0 + slack) * earlier + 1e-14 for earlier, later in zip(dispersion, dispersion[1:]))
    return VarianceDecayReport(
        deltas=estimate.deltas,
        dispersion=dispersion,
        threshold=float(threshold),
        monotone=monotone,
        final_ok=bool(dispersion[-1] <= threshold),
        estimate=estimate,
    )
