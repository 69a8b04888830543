from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from hjhomog.errors import ExtrapolationError, NonconvergenceError, ParameterError
from hjhomog.grid import GridSpec
from hjhomog.models import DiffusionFamily, DiffusionModel, HamiltonianModel

logger = logging.getLogger(__name__)

# Lattice directions of the wide stencil, ordered by angle in [0, pi).
_WIDE_STENCIL = np.array(
    [(1, 0), (2, 1), (1, 1), (1, 2), (0, 1), (-1, 2), (-1, 1), (-2, 1)],
    dtype=np.int64,
)
_WIDE_ANGLES = np.append(np.arctan2(_WIDE_STENCIL[:, 1], _WIDE_STENCIL[:, 0]), np.pi)
_WIDE_NORM2 = np.sum(_WIDE_STENCIL**2, axis=-1).astype(float)

AUTO_DISSIPATION_FACTOR = 1.1
GRADIENT_RANGE_MARGIN = 0.5
STABILITY_SLACK = 1e-12


@dataclass(frozen=True)
class SchemeParams:
    """Knobs of the monotone explicit schemes.

    ``lf_dissipation`` and ``pseudo_time_step`` default to automatic values
    sized from the model; an explicit value is checked against the stability
    bound when the scheme is assembled.
    """

    lf_dissipation: float | None = None
    pseudo_time_step: float | None = None
    cfl: float = 0.9
    dissipation_scale: float = 1.0
    stop_tol: float = 1e-9
    max_iters: int = 10_000_000
    gradient_epsilon: float = 1e-8
    diagnostics_every: int = 10_000

    def __post_init__(self) -> None:
        if not self.stop_tol > 0:
            raise ParameterError("must be > 0", key="stop_tol")
        if int(self.max_iters) < 1:
            raise ParameterError("must be >= 1", key="max_iters")
        if not 0 < self.cfl <= 1:
            raise ParameterError("must lie in (0, 1]", key="cfl")
        if not self.dissipation_scale > 0:
            raise ParameterError("must be > 0", key="dissipation_scale")
        if not self.gradient_epsilon > 0:
            raise ParameterError("must be > 0", key="gradient_epsilon")
        if int(self.diagnostics_every) < 1:
            raise ParameterError("must be >= 1", key="diagnostics_every")
        if self.lf_dissipation is not None and self.lf_dissipation < 0:
            raise ParameterError("must be >= 0", key="lf_dissipation")
        if self.pseudo_time_step is not None and not self.pseudo_time_step > 0:
            raise ParameterError("must be > 0", key="pseudo_time_step")


def stability_rate(delta: float, sigma: float, nu_max: float, grid: GridSpec) -> float:
    """Largest diagonal coefficient of the explicit operator; tau * rate <= 1 keeps it monotone."""
    h = grid.spacing
    return delta + 2.0 * sigma / h + 2.0 * grid.dim * nu_max / (h * h)


def resolve_time_step(params: SchemeParams, rate: float) -> float:
    if params.pseudo_time_step is None:
        return math.inf if rate == 0.0 else params.cfl / rate
    tau = float(params.pseudo_time_step)
    if tau * rate > 1.0 + STABILITY_SLACK:
        raise ParameterError(
            f"tau={tau:g} violates the stability bound tau * {rate:g} <= 1 (max tau {1.0 / rate:g})",
            key="pseudo_time_step",
        )
    return tau


def resolve_dissipation(params: SchemeParams, bound: float) -> float:
    """Pick sigma from the sampled |dH/dq| bound, honouring an explicit value and the scale knob."""
    if params.lf_dissipation is None:
        sigma = AUTO_DISSIPATION_FACTOR * bound
    else:
        sigma = float(params.lf_dissipation)
    sigma *= params.dissipation_scale
    if sigma < bound:
        logger.warning(
            "Lax-Friedrichs dissipation %.6g is below the sampled |dH/dp| bound %.6g; the scheme is not monotone",
            sigma,
            bound,
        )
    return sigma


def periodic_differences(v: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward differences, each of shape (*shape, dim)."""
    h = grid.spacing
    forward = np.stack([(np.roll(v, -1, axis=axis) - v) / h for axis in range(grid.dim)], axis=-1)
    backward = np.stack([(v - np.roll(v, 1, axis=axis)) / h for axis in range(grid.dim)], axis=-1)
    return forward, backward


def discrete_lipschitz(v: np.ndarray, grid: GridSpec) -> float:
    forward, _ = periodic_differences(v, grid)
    return float(np.max(np.linalg.norm(forward, axis=-1)))


def _laplacian(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    h2 = grid.spacing**2
    out = np.zeros_like(v)
    for axis in range(grid.dim):
        out += np.roll(v, -1, axis=axis) + np.roll(v, 1, axis=axis) - 2.0 * v
    return out / h2


@dataclass(frozen=True, eq=False)
class StencilDirection:
    """Wide-stencil directions frozen from a gradient field.

    The second derivative orthogonal to q is the mix ``weight`` * D_lower +
    (1 - weight) * D_upper of two lattice second differences. Once frozen the
    weights no longer depend on the iterate, so every neighbour enters with a
    nonnegative coefficient. Nodes with |q| below the threshold carry no term.
    """

    lower: np.ndarray
    upper: np.ndarray
    weight: np.ndarray
    active: np.ndarray

    @classmethod
    def from_gradient(cls, q: np.ndarray, epsilon: float) -> "StencilDirection":
        angle = np.mod(np.arctan2(q[..., 0], -q[..., 1]), np.pi)
        lower = np.clip(np.searchsorted(_WIDE_ANGLES, angle, side="right") - 1, 0, len(_WIDE_STENCIL) - 1)
        upper = (lower + 1) % len(_WIDE_STENCIL)
        weight = (_WIDE_ANGLES[lower + 1] - angle) / (_WIDE_ANGLES[lower + 1] - _WIDE_ANGLES[lower])
        active = np.linalg.norm(q, axis=-1) >= epsilon
        return cls(lower=lower, upper=upper, weight=weight, active=active)

    def diagonal(self, h: float) -> np.ndarray:
        """Magnitude of the centre coefficient of the mixed second difference."""
        centre = 2.0 * (self.weight / _WIDE_NORM2[self.lower] + (1.0 - self.weight) / _WIDE_NORM2[self.upper])
        return np.where(self.active, centre / (h * h), 0.0)

    def apply(self, v: np.ndarray, grid: GridSpec) -> np.ndarray:
        h2 = grid.spacing**2
        second = np.stack(
            [
                (
                    np.roll(v, (-int(xi[0]), -int(xi[1])), axis=(0, 1))
                    + np.roll(v, (int(xi[0]), int(xi[1])), axis=(0, 1))
                    - 2.0 * v
                )
                / (norm2 * h2)
                for xi, norm2 in zip(_WIDE_STENCIL, _WIDE_NORM2)
            ]
        )
        low = np.take_along_axis(second, self.lower[None], axis=0)[0]
        high = np.take_along_axis(second, self.upper[None], axis=0)[0]
        return np.where(self.active, self.weight * low + (1.0 - self.weight) * high, 0.0)

    def apply_at(self, flat: np.ndarray, nodes: np.ndarray, plan: "SweepPlan", h: float) -> np.ndarray:
        """Mixed second difference at the flat indices ``nodes`` only."""
        weight = self.weight.reshape(-1)[nodes]
        low = _wide_second_at(flat, nodes, self.lower.reshape(-1)[nodes], plan, h)
        high = _wide_second_at(flat, nodes, self.upper.reshape(-1)[nodes], plan, h)
        return np.where(self.active.reshape(-1)[nodes], weight * low + (1.0 - weight) * high, 0.0)


def _wide_second_at(flat: np.ndarray, nodes: np.ndarray, which: np.ndarray, plan: "SweepPlan", h: float) -> np.ndarray:
    plus = flat[plan.wide_neighbors[which, 0, nodes]]
    minus = flat[plan.wide_neighbors[which, 1, nodes]]
    return (plus + minus - 2.0 * flat[nodes]) / (_WIDE_NORM2[which] * h * h)


@dataclass(frozen=True, eq=False)
class SweepPlan:
    """Flat node indices of the two lattice colours and of every node's stencil neighbours.

    ``axis_neighbors[k, 0]`` holds x + h e_k and ``axis_neighbors[k, 1]`` holds
    x - h e_k; ``wide_neighbors`` does the same for the wide stencil in 2D.
    """

    colors: tuple[np.ndarray, np.ndarray]
    axis_neighbors: np.ndarray
    wide_neighbors: np.ndarray | None = None

    @classmethod
    def for_grid(cls, grid: GridSpec) -> "SweepPlan":
        index = np.arange(grid.size).reshape(grid.shape)
        parity = np.sum(np.indices(grid.shape), axis=0) % 2
        colors = (index[parity == 0].ravel(), index[parity == 1].ravel())
        axis_neighbors = np.stack(
            [
                np.stack([np.roll(index, -1, axis=axis).ravel(), np.roll(index, 1, axis=axis).ravel()])
                for axis in range(grid.dim)
            ]
        )
        wide = None
        if grid.dim == 2:
            wide = np.stack(
                [
                    np.stack(
                        [
                            np.roll(index, (-int(xi[0]), -int(xi[1])), axis=(0, 1)).ravel(),
                            np.roll(index, (int(xi[0]), int(xi[1])), axis=(0, 1)).ravel(),
                        ]
                    )
                    for xi in _WIDE_STENCIL
                ]
            )
        return cls(colors=colors, axis_neighbors=axis_neighbors, wide_neighbors=wide)


@dataclass(frozen=True, eq=False)
class LatticeHamiltonian:
    """H(q, x) at lattice nodes; ``nodes`` restricts the coefficient to flat indices."""

    model: HamiltonianModel
    coefficient: np.ndarray

    def __call__(self, q: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
        coefficient = self.coefficient if nodes is None else self.coefficient.reshape(-1)[nodes]
        return self.model.evaluate(q, coefficient)


@dataclass(frozen=True, eq=False)
class LatticeScheme:
    """Explicit monotone operator F(v) = delta v - tr(A D^2 v) + H_LF on a periodic lattice.

    ``hamiltonian`` maps gradients of shape (*shape, dim) to lattice values;
    ``nu`` is the lattice diffusion coefficient of ``diffusion``. For
    CurvatureProjection in 2D ``direction`` freezes the wide-stencil
    directions; ``with_direction`` refreshes them from an iterate.
    """

    grid: GridSpec
    hamiltonian: Callable[..., np.ndarray]
    diffusion: DiffusionFamily
    nu: np.ndarray | float
    sigma: float
    tau: float
    gradient_epsilon: float = 1e-8
    gradient_radius: float = math.inf
    direction: StencilDirection | None = None

    @property
    def projects(self) -> bool:
        return self.diffusion is DiffusionFamily.CURVATURE_PROJECTION and self.grid.dim == 2

    def gradient(self, v: np.ndarray, momentum: np.ndarray, slope: np.ndarray | None = None) -> np.ndarray:
        forward, backward = periodic_differences(v, self.grid)
        q = 0.5 * (forward + backward) + momentum
        return q if slope is None else q - slope

    def with_direction(
        self,
        v: np.ndarray,
        momentum: np.ndarray,
        slope: np.ndarray | None = None,
    ) -> "LatticeScheme":
        if not self.projects:
            return self
        q = self.gradient(v, momentum, slope)
        return replace(self, direction=StencilDirection.from_gradient(q, self.gradient_epsilon))

    def numerical_hamiltonian(
        self,
        v: np.ndarray,
        momentum: np.ndarray,
        slope: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        forward, backward = periodic_differences(v, self.grid)
        if slope is not None:
            forward = forward - slope
            backward = backward - slope
        q = 0.5 * (forward + backward) + momentum
        value = self.hamiltonian(q) - 0.5 * self.sigma * np.sum(forward - backward, axis=-1)
        return value, q

    def diffusion_term(self, v: np.ndarray, q: np.ndarray) -> np.ndarray | float:
        if self.diffusion is DiffusionFamily.ZERO:
            return 0.0
        if self.diffusion is DiffusionFamily.ISOTROPIC:
            return self.nu * _laplacian(v, self.grid)
        if not self.projects:
            return 0.0
        direction = self.direction or StencilDirection.from_gradient(q, self.gradient_epsilon)
        return self.nu * direction.apply(v, self.grid)

    def operator(
        self,
        v: np.ndarray,
        delta: float,
        momentum: np.ndarray,
        slope: np.ndarray | None = None,
    ) -> np.ndarray:
        """Residual of the discounted equation; ``slope`` is subtracted from every difference."""
        value, q = self.numerical_hamiltonian(v, momentum, slope)
        return delta * v - self.diffusion_term(v, q) + value

    def step(self, v: np.ndarray, delta: float, momentum: np.ndarray) -> np.ndarray:
        return v - self.tau * self.operator(v, delta, momentum)

    def diagonal(self, delta: float) -> np.ndarray:
        """dF_i / dv_i; F_i is affine in v_i because the gradient uses neighbours only."""
        h = self.grid.spacing
        diagonal = np.full(self.grid.shape, delta + self.grid.dim * self.sigma / h)
        if self.diffusion is DiffusionFamily.ISOTROPIC:
            diagonal = diagonal + 2.0 * self.grid.dim * self.nu / (h * h)
        elif self.projects and self.direction is not None:
            diagonal = diagonal + self.nu * self.direction.diagonal(h)
        return diagonal

    def local_residual(
        self,
        flat: np.ndarray,
        nodes: np.ndarray,
        delta: float,
        momentum: np.ndarray,
        plan: SweepPlan,
    ) -> np.ndarray:
        """F at the flat indices ``nodes`` of the flattened iterate ``flat``."""
        h = self.grid.spacing
        plus = flat[plan.axis_neighbors[:, 0, nodes]]
        minus = flat[plan.axis_neighbors[:, 1, nodes]]
        centre = flat[nodes]
        q = (plus - minus).T / (2.0 * h) + momentum
        second = np.sum(plus + minus - 2.0 * centre, axis=0)
        residual = delta * centre + self.hamiltonian(q, nodes) - 0.5 * self.sigma * second / h
        if self.diffusion is DiffusionFamily.ISOTROPIC:
            residual -= _at(self.nu, nodes) * second / (h * h)
        elif self.projects and self.direction is not None:
            residual -= _at(self.nu, nodes) * self.direction.apply_at(flat, nodes, plan, h)
        return residual

    def sweep(
        self,
        v: np.ndarray,
        delta: float,
        momentum: np.ndarray,
        plan: SweepPlan,
    ) -> tuple[np.ndarray, float]:
        """One nonlinear Gauss-Seidel pass, colour by colour, solving each node's equation exactly.

        Returns the new iterate and the largest local residual met on the way.
        """
        flat = np.array(v, dtype=float).reshape(-1)
        diagonal = self.diagonal(delta).reshape(-1)
        worst = 0.0
        for nodes in plan.colors:
            residual = self.local_residual(flat, nodes, delta, momentum, plan)
            worst = max(worst, float(np.max(np.abs(residual))))
            flat[nodes] -= residual / diagonal[nodes]
        return flat.reshape(v.shape), worst

    def max_gradient(self, v: np.ndarray, momentum: np.ndarray) -> float:
        q = self.gradient(v, momentum)
        return float(np.max(np.linalg.norm(q, axis=-1)))


def _at(values: np.ndarray | float, nodes: np.ndarray) -> np.ndarray | float:
    if np.ndim(values) == 0:
        return values
    return np.asarray(values).reshape(-1)[nodes]


def _momentum(p: Sequence[float] | float, dim: int) -> np.ndarray:
    momentum = np.atleast_1d(np.asarray(p, dtype=float))
    if momentum.shape != (dim,):
        raise ParameterError(f"momentum must have {dim} components, got {momentum.tolist()}", key="p")
    return momentum


def _lattice_coefficient(H: HamiltonianModel, grid: GridSpec) -> np.ndarray:
    if H.field.grid == grid:
        return H.field.values
    return np.asarray(H.field.value_at(grid.coordinates))


def _lattice_nu(A: DiffusionModel, grid: GridSpec) -> np.ndarray:
    if A.family is DiffusionFamily.ZERO or A.field is None or A.field.grid == grid:
        return A.lattice_coefficient(grid)
    return np.maximum(A.nu_min, A.nu * np.asarray(A.field.value_at(grid.coordinates)))


def _gradient_radius(H: HamiltonianModel, momentum: np.ndarray) -> float:
    """Radius of the gradient range {q : min_x H(q, x) <= max_x |H(p, x)|}, padded."""
    level = H.a_priori_bound(momentum)
    radius = max(H.coercivity_radius(level), float(np.linalg.norm(momentum)))
    return radius + GRADIENT_RANGE_MARGIN


def build_discounted_scheme(
    H: HamiltonianModel,
    A: DiffusionModel,
    p: Sequence[float] | float,
    delta: float,
    grid: GridSpec,
    params: SchemeParams,
) -> LatticeScheme:
    """Assemble the scheme for the discounted problem; raises ParameterError when unstable.

    Projection directions start frozen at the gradient of v = 0, i.e. at p.
    """
    momentum = _momentum(p, grid.dim)
    coefficient = _lattice_coefficient(H, grid)
    radius = _gradient_radius(H, momentum)
    sigma = resolve_dissipation(params, H.dissipation_bound(radius))
    nu = _lattice_nu(A, grid)
    nu_max = float(np.max(nu))
    tau = resolve_time_step(params, stability_rate(delta, sigma, nu_max, grid))
    scheme = LatticeScheme(
        grid=grid,
        hamiltonian=LatticeHamiltonian(H, coefficient),
        diffusion=A.family,
        nu=nu,
        sigma=sigma,
        tau=tau,
        gradient_epsilon=params.gradient_epsilon,
        gradient_radius=radius,
    )
    return scheme.with_direction(np.zeros(grid.shape), momentum)


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    v: np.ndarray
    delta: float
    p: np.ndarray
    residual_sup: float
    iterations: int
    lipschitz_estimate: float
    sup_norm_delta_v: float
    grid: GridSpec
    a_priori_bound: float = 0.0
    sigma: float = 0.0
    tau: float = 0.0
    residual_history: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    @property
    def value_at_origin(self) -> float:
        return float(self.v.reshape(-1)[0])

    def warm_start(self, delta: float) -> np.ndarray:
        """Initial guess for a smaller discount.

        Adding a constant c to v adds delta * c to the residual, so the mean
        of v is rescaled by the discount ratio and the fluctuation is kept.
        """
        mean = float(np.mean(self.v))
        return self.v - mean + mean * self.delta / delta


def _consistent_residual(scheme: LatticeScheme, v: np.ndarray, delta: float, momentum: np.ndarray) -> float:
    residual = scheme.with_direction(v, momentum).operator(v, delta, momentum)
    return float(np.max(np.abs(residual)))


def solve_discounted(
    H: HamiltonianModel,
    A: DiffusionModel,
    p: Sequence[float] | float,
    delta: float,
    grid: GridSpec,
    params: SchemeParams,
    initial: np.ndarray | None = None,
) -> DiscountedSolution:
    """Fixed point of the monotone pseudo-time iteration, reached by Gauss-Seidel sweeps.

    Each sweep solves every node's equation exactly with its neighbours held
    fixed, first on one lattice colour and then on the other. Projection
    directions are refreshed from the iterate before each sweep and frozen
    during it. ``iterations`` counts sweeps; convergence is judged on the sup
    norm of the residual with directions taken from the returned v.
    """
    if not delta > 0:
        raise ParameterError("must be > 0", key="delta")
    momentum = _momentum(p, grid.dim)
    scheme = build_discounted_scheme(H, A, momentum, delta, grid, params)
    plan = SweepPlan.for_grid(grid)
    if initial is None:
        v = np.zeros(grid.shape)
    else:
        v = np.array(initial, dtype=float).reshape(grid.shape)

    every = int(params.diagnostics_every)
    iterations = 0
    residual_sup = _consistent_residual(scheme, v, delta, momentum)
    history: list[tuple[int, float]] = [(0, residual_sup)]
    while residual_sup > params.stop_tol:
        if not math.isfinite(residual_sup) or iterations >= params.max_iters:
            if history[-1][0] != iterations:
                history.append((iterations, residual_sup))
            raise NonconvergenceError(
                f"discounted solve at delta={delta:g} stopped at residual {residual_sup:.3e} "
                f"after {iterations} sweeps",
                iterations=iterations,
                residual_history=tuple(history),
                delta=delta,
            )
        scheme = scheme.with_direction(v, momentum)
        v, local = scheme.sweep(v, delta, momentum, plan)
        iterations += 1
        checkpoint = iterations % every == 0
        if local <= params.stop_tol or checkpoint or iterations >= params.max_iters or not math.isfinite(local):
            residual_sup = _consistent_residual(scheme, v, delta, momentum)
        else:
            residual_sup = local
        if checkpoint:
            history.append((iterations, residual_sup))
            logger.debug("delta=%g sweep=%d residual=%.3e", delta, iterations, residual_sup)

    if history[-1][0] != iterations:
        history.append((iterations, residual_sup))
    gradient = scheme.max_gradient(v, momentum)
    if gradient > scheme.gradient_radius:
        logger.warning(
            "discrete gradients reach %.4g, beyond the sampled range %.4g", gradient, scheme.gradient_radius
        )
    logger.info("delta=%g converged in %d sweeps (residual %.2e)", delta, iterations, residual_sup)
    return DiscountedSolution(
        v=v,
        delta=float(delta),
        p=momentum,
        residual_sup=residual_sup,
        iterations=iterations,
        lipschitz_estimate=discrete_lipschitz(v, grid),
        sup_norm_delta_v=float(delta * np.max(np.abs(v))),
        grid=grid,
        a_priori_bound=H.a_priori_bound(momentum),
        sigma=scheme.sigma,
        tau=scheme.tau,
        residual_history=tuple(history),
    )


@dataclass(frozen=True)
class AssumptionReport:
    bound: float
    C_R: float
    passed: bool
    sup_norm_delta_v: float
    lipschitz_estimate: float
    max_abs_H: float


def check_assumption_H(sol: DiscountedSolution, C_R: float) -> AssumptionReport:
    bound = sol.sup_norm_delta_v + sol.lipschitz_estimate
    return AssumptionReport(
        bound=bound,
        C_R=float(C_R),
        passed=bool(bound <= C_R),
        sup_norm_delta_v=sol.sup_norm_delta_v,
        lipschitz_estimate=sol.lipschitz_estimate,
        max_abs_H=sol.a_priori_bound,
    )


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Snapshots of u = slope . x + w(x, t) with periodic w."""

    grid: GridSpec
    times: np.ndarray
    values: np.ndarray
    slope: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.full(len(self.times) - 1)

    def full(self, index: int) -> np.ndarray:
        return self.values[index] + self.grid.coordinates @ self.slope


def _initial_datum(u0: np.ndarray | Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> np.ndarray:
    values = u0(grid.coordinates) if callable(u0) else u0
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ParameterError(f"initial datum must have shape {grid.shape}, got {values.shape}", key="u0")
    return values.copy()


def _march(
    scheme: LatticeScheme,
    w: np.ndarray,
    slope: np.ndarray,
    T: float,
    record_every: int | None,
) -> tuple[np.ndarray, np.ndarray]:
    steps = 1 if math.isinf(scheme.tau) else max(1, math.ceil(T / scheme.tau - 1e-12))
    dt = T / steps
    times = [0.0]
    snapshots = [w.copy()]
    # Projection directions lag one time level behind the datum they act on.
    scheme = scheme.with_direction(w, slope)
    for n in range(1, steps + 1):
        updated = w - dt * scheme.operator(w, 0.0, slope)
        scheme = scheme.with_direction(w, slope)
        w = updated
        if not np.all(np.isfinite(w)):
            raise NonconvergenceError(
                f"time marching blew up at step {n}", iterations=n, residual_history=()
            )
        if (record_every and n % record_every == 0) or n == steps:
            times.append(n * dt)
            snapshots.append(w.copy())
    logger.info("marched to T=%g in %d steps (dt=%.3e)", T, steps, dt)
    return np.asarray(times), np.stack(snapshots)


def _check_horizon(T: float) -> None:
    if not T > 0:
        raise ParameterError("must be > 0", key="T")


def solve_oscillatory(
    H: HamiltonianModel,
    A: DiffusionModel,
    epsilon: float,
    u0: np.ndarray | Callable[[np.ndarray], np.ndarray],
    T: float,
    grid: GridSpec,
    params: SchemeParams,
    slope: Sequence[float] | None = None,
    record_every: int | None = None,
) -> SpaceTimeField:
    """u_t - eps tr(A(Du, x/eps) D^2 u) + H(Du, x/eps) = 0 on the macroscopic torus ``grid``."""
    if not 0 < epsilon <= 1:
        raise ParameterError("must lie in (0, 1]", key="epsilon")
    _check_horizon(T)
    if grid.spacing > epsilon / 8 * (1 + 1e-12):
        raise ParameterError(
            f"spacing {grid.spacing:g} does not resolve x/eps oscillations (need h <= eps/8 = {epsilon / 8:g})",
            key="spacing",
        )
    cells = grid.extent / epsilon / H.field.grid.extent
    if abs(cells - round(cells)) > 1e-9 or round(cells) < 1:
        raise ParameterError(
            "macroscopic extent / epsilon must be a multiple of the environment extent",
            key="epsilon",
        )
    offset = np.zeros(grid.dim) if slope is None else _momentum(slope, grid.dim)
    fast = grid.coordinates / epsilon
    coefficient = np.asarray(H.field.value_at(fast))
    if A.family is DiffusionFamily.ZERO:
        nu: np.ndarray | float = 0.0
    else:
        nu = epsilon * np.broadcast_to(np.asarray(A.coefficient(fast), dtype=float), grid.shape)
    w = _initial_datum(u0, grid)

    forward, backward = periodic_differences(w, grid)
    level = max(
        float(np.max(np.abs(H.evaluate(forward + offset, coefficient)))),
        float(np.max(np.abs(H.evaluate(backward + offset, coefficient)))),
    )
    radius = H.coercivity_radius(level) + GRADIENT_RANGE_MARGIN
    radius = max(radius, float(np.max(np.linalg.norm(forward + offset, axis=-1))))
    sigma = resolve_dissipation(params, H.dissipation_bound(radius))
    nu_max = float(np.max(nu))
    tau = resolve_time_step(params, stability_rate(0.0, sigma, nu_max, grid))
    scheme = LatticeScheme(
        grid=grid,
        hamiltonian=LatticeHamiltonian(H, np.asarray(coefficient, dtype=float)),
        diffusion=A.family,
        nu=nu,
        sigma=sigma,
        tau=tau,
        gradient_epsilon=params.gradient_epsilon,
        gradient_radius=radius,
    )
    times, values = _march(scheme, w, offset, T, record_every)
    return SpaceTimeField(grid=grid, times=times, values=values, slope=offset)


@dataclass(frozen=True, eq=False)
class TabulatedHamiltonian:
    """Piecewise-linear H-bar on a tensor p-grid; queries outside the grid raise."""

    nodes: tuple[np.ndarray, ...]
    values: np.ndarray
    _interpolator: RegularGridInterpolator | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = tuple(np.asarray(axis, dtype=float) for axis in self.nodes)
        values = np.asarray(self.values, dtype=float)
        if len(nodes) not in (1, 2):
            raise ParameterError("tabulated H-bar must be 1D or 2D", key="nodes")
        if values.shape != tuple(axis.size for axis in nodes):
            raise ParameterError("values do not match node shape", key="values")
        for axis in nodes:
            if axis.size < 2 or np.any(np.diff(axis) <= 0):
                raise ParameterError("nodes must be strictly increasing with >= 2 entries", key="nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if len(nodes) == 2:
            object.__setattr__(self, "_interpolator", RegularGridInterpolator(nodes, values, method="linear"))

    @property
    def dim(self) -> int:
        return len(self.nodes)

    def slope_bound(self) -> float:
        """Largest |difference quotient| along any axis; bounds |dH-bar/dp_i|."""
        bound = 0.0
        for axis, nodes in enumerate(self.nodes):
            quotient = np.diff(self.values, axis=axis) / np.expand_dims(
                np.diff(nodes), tuple(k for k in range(self.dim) if k != axis)
            )
            bound = max(bound, float(np.max(np.abs(quotient))))
        return bound

    def __call__(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        for axis, nodes in enumerate(self.nodes):
            component = q[..., axis]
            if np.any(component < nodes[0] - 1e-12) or np.any(component > nodes[-1] + 1e-12):
                worst = float(np.max(np.abs(component)))
                raise ExtrapolationError(
                    f"gradient component {axis} reaches {worst:.4g}, outside the tabulated range "
                    f"[{nodes[0]:g}, {nodes[-1]:g}]"
                )
        if self.dim == 1:
            return np.interp(q[..., 0], self.nodes[0], self.values)
        clipped = np.stack(
            [np.clip(q[..., axis], nodes[0], nodes[-1]) for axis, nodes in enumerate(self.nodes)], axis=-1
        )
        return self._interpolator(clipped.reshape(-1, 2)).reshape(q.shape[:-1])


def solve_effective(
    Hbar: TabulatedHamiltonian,
    u0: np.ndarray | Callable[[np.ndarray], np.ndarray],
    T: float,
    grid: GridSpec,
    params: SchemeParams,
    slope: Sequence[float] | None = None,
    record_every: int | None = None,
) -> SpaceTimeField:
    """u_t + H-bar(Du) = 0 with Lax-Friedrichs marching on the tabulated Hamiltonian."""
    _check_horizon(T)
    if Hbar.dim != grid.dim:
        raise ParameterError(f"tabulated H-bar is {Hbar.dim}D but the grid is {grid.dim}D", key="nodes")
    offset = np.zeros(grid.dim) if slope is None else _momentum(slope, grid.dim)
    w = _initial_datum(u0, grid)
    bound = Hbar.slope_bound()
    sigma = resolve_dissipation(params, bound)
    tau = resolve_time_step(params, stability_rate(0.0, sigma, 0.0, grid))
    scheme = LatticeScheme(
        grid=grid,
        hamiltonian=Hbar,
        diffusion=DiffusionFamily.ZERO,
        nu=0.0,
        sigma=sigma,
        tau=tau,
        gradient_epsilon=params.gradient_epsilon,
    )
    times, values = _march(scheme, w, offset, T, record_every)
    return SpaceTimeField(grid=grid, times=times, values=values, slope=offset)
