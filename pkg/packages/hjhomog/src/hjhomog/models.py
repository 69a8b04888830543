from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from hjhomog.environment import EnvironmentSpec, FieldRole, FieldSample, sample_field, shift_field
from hjhomog.errors import DomainError, ParameterError
from hjhomog.grid import GridSpec


class HamiltonianFamily(str, Enum):
    EIKONAL = "Eikonal"
    QUADRATIC_POTENTIAL = "QuadraticPotential"
    DOUBLE_WELL = "DoubleWell"


class DiffusionFamily(str, Enum):
    ZERO = "Zero"
    ISOTROPIC = "Isotropic"
    CURVATURE_PROJECTION = "CurvatureProjection"


_FIELD_ROLE = {
    HamiltonianFamily.EIKONAL: FieldRole.SPEED,
    HamiltonianFamily.QUADRATIC_POTENTIAL: FieldRole.POTENTIAL,
    HamiltonianFamily.DOUBLE_WELL: FieldRole.POTENTIAL,
}


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """H(p, x) = c(x)|p|, |p|^2 - V(x) or (|p|^2 - 1)^2 - V(x)."""

    family: HamiltonianFamily
    field: FieldSample

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", HamiltonianFamily(self.family))
        if self.family is HamiltonianFamily.EIKONAL and not self.field.floor > 0:
            raise ParameterError("Eikonal speed field must have a positive floor", key="environment")
        if self.family is not HamiltonianFamily.EIKONAL and self.field.floor < 0:
            raise ParameterError("potential V must be >= 0", key="environment")

    @property
    def convex_in_p(self) -> bool:
        return self.family is not HamiltonianFamily.DOUBLE_WELL

    @property
    def homogeneity_degree(self) -> float | None:
        return 1.0 if self.family is HamiltonianFamily.EIKONAL else None

    @property
    def coercive(self) -> bool:
        return True

    @property
    def subhomogeneous(self) -> bool:
        """0 <= H(lambda p, x) <= lambda H(p, x) for lambda in [0, 1]."""
        return self.family is HamiltonianFamily.EIKONAL

    def evaluate(self, q: np.ndarray, coefficient: np.ndarray | float) -> np.ndarray:
        """Vectorized H; q has shape (..., dim), coefficient broadcasts against q[..., 0]."""
        q = np.asarray(q, dtype=float)
        squared = np.sum(q * q, axis=-1)
        if self.family is HamiltonianFamily.EIKONAL:
            return coefficient * np.sqrt(squared)
        if self.family is HamiltonianFamily.QUADRATIC_POTENTIAL:
            return squared - coefficient
        return (squared - 1.0) ** 2 - coefficient

    def gradient_magnitude(self, radius: np.ndarray) -> np.ndarray:
        """Upper bound of |dH/dq| on the sphere |q| = radius, uniform in x."""
        r = np.asarray(radius, dtype=float)
        if self.family is HamiltonianFamily.EIKONAL:
            return np.full_like(r, self.field.cap)
        if self.family is HamiltonianFamily.QUADRATIC_POTENTIAL:
            return 2.0 * r
        return 4.0 * r * np.abs(r * r - 1.0)

    def dissipation_bound(self, radius: float, samples: int = 257) -> float:
        radii = np.linspace(0.0, radius, samples)
        return float(np.max(self.gradient_magnitude(radii)))

    def coercivity_radius(self, level: float) -> float:
        """Smallest r with min_x H(q, x) > level whenever |q| > r."""
        if self.family is HamiltonianFamily.EIKONAL:
            return max(level, 0.0) / self.field.floor
        shifted = max(level + self.field.cap, 0.0)
        if self.family is HamiltonianFamily.QUADRATIC_POTENTIAL:
            return float(np.sqrt(shifted))
        return float(np.sqrt(1.0 + np.sqrt(shifted)))

    def coercivity_constants(self) -> tuple[float, float]:
        """(alpha, C) with H(p, x) >= alpha|p| - C."""
        if self.family is HamiltonianFamily.EIKONAL:
            return self.field.floor, 0.0
        if self.family is HamiltonianFamily.QUADRATIC_POTENTIAL:
            return 1.0, self.field.cap + 0.25
        return 1.0, self.field.cap + 1.1

    def lattice_values(self, momentum: Sequence[float] | float) -> np.ndarray:
        dim = self.field.grid.dim
        q = np.broadcast_to(np.atleast_1d(np.asarray(momentum, dtype=float)), self.field.values.shape + (dim,))
        return self.evaluate(q, self.field.values)

    def a_priori_bound(self, momentum: Sequence[float] | float) -> float:
        """max_x |H(p, x)| over the lattice; bounds |delta v| for the discounted problem."""
        return float(np.max(np.abs(self.lattice_values(momentum))))

    def shifted(self, z: Sequence[float] | float) -> "HamiltonianModel":
        return replace(self, field=shift_field(self.field, z))


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """A = 0, nu(x) I, or nu(x)(I - p^ p^) with nu(x) = max(nu_min, nu * field(x))."""

    family: DiffusionFamily
    field: FieldSample | None = None
    nu: float = 0.0
    nu_min: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", DiffusionFamily(self.family))
        if self.nu < 0:
            raise ParameterError("must be >= 0", key="nu")
        if self.nu_min < 0:
            raise ParameterError("must be >= 0", key="nu_min")

    @property
    def p_independent(self) -> bool:
        return self.family is not DiffusionFamily.CURVATURE_PROJECTION

    def coefficient(self, x: np.ndarray | Sequence[float] | float) -> np.ndarray | float:
        if self.family is DiffusionFamily.ZERO:
            return 0.0
        if self.field is None:
            return max(self.nu_min, self.nu)
        return np.maximum(self.nu_min, self.nu * self.field.value_at(x))

    def lattice_coefficient(self, grid: GridSpec) -> np.ndarray:
        if self.family is DiffusionFamily.ZERO:
            return np.zeros(grid.shape)
        if self.field is None:
            return np.full(grid.shape, max(self.nu_min, self.nu))
        return np.maximum(self.nu_min, self.nu * self.field.values)

    def nu_max(self, grid: GridSpec) -> float:
        return float(np.max(self.lattice_coefficient(grid)))

    def shifted(self, z: Sequence[float] | float) -> "DiffusionModel":
        if self.field is None:
            return self
        return replace(self, field=shift_field(self.field, z))


@dataclass(frozen=True)
class HamiltonianSpec:
    """A Hamiltonian family paired with the law of its environment field."""

    family: HamiltonianFamily
    environment: EnvironmentSpec

    def build(self, grid: GridSpec, seed: int | None = None) -> HamiltonianModel:
        family = HamiltonianFamily(self.family)
        env = replace(self.environment, role=_FIELD_ROLE[family])
        if seed is not None:
            env = env.with_seed(seed)
        return HamiltonianModel(family=family, field=sample_field(env, grid))


@dataclass(frozen=True)
class DiffusionSpec:
    family: DiffusionFamily = DiffusionFamily.ZERO
    nu: float = 0.0
    nu_min: float = 0.0
    environment: EnvironmentSpec | None = None

    def build(self, grid: GridSpec, seed: int | None = None) -> DiffusionModel:
        sample = None
        if self.environment is not None:
            env = replace(self.environment, role=FieldRole.COEFFICIENT)
            sample = sample_field(env.with_seed(seed) if seed is not None else env, grid)
        return DiffusionModel(family=self.family, field=sample, nu=self.nu, nu_min=self.nu_min)


def eval_H(model: HamiltonianModel, p: Sequence[float] | float, x: Sequence[float] | float) -> float:
    q = np.atleast_1d(np.asarray(p, dtype=float))
    return float(model.evaluate(q, model.field.value_at(x)))


def eval_A(model: DiffusionModel, p: Sequence[float] | float, x: Sequence[float] | float, dim: int | None = None) -> np.ndarray:
    q = np.atleast_1d(np.asarray(p, dtype=float))
    d = dim or q.shape[0]
    if model.family is DiffusionFamily.ZERO:
        return np.zeros((d, d))
    nu = float(model.coefficient(x))
    if model.family is DiffusionFamily.ISOTROPIC:
        return nu * np.eye(d)
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise DomainError("CurvatureProjection diffusion is undefined at p = 0")
    unit = q / norm
    return nu * (np.eye(d) - np.outer(unit, unit))


@dataclass(frozen=True)
class StructureCheck:
    name: str
    declared: bool
    passed: bool
    samples: int
    witness: dict[str, float | list[float]] | None = None


@dataclass(frozen=True)
class StructureReport:
    family: str
    checks: tuple[StructureCheck, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        """True when every declared property survived its sampled test."""
        return all(check.passed for check in self.checks if check.declared)

    def check(self, name: str) -> StructureCheck:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(f"no structure check named {name!r}")


def _sample_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    direction = rng.normal(size=(count, dim))
    direction /= np.maximum(np.linalg.norm(direction, axis=-1, keepdims=True), 1e-300)
    r = radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / dim)
    return direction * r


def check_structure(
    model: HamiltonianModel,
    samples: int,
    *,
    seed: int = 0,
    radius: float = 2.0,
    far_radius: float = 10.0,
    tol: float = 1e-12,
) -> StructureReport:
    """Sample (p, x, lambda) and test convexity, homogeneity, sub-homogeneity and coercivity."""
    rng = np.random.default_rng(seed)
    grid = model.field.grid
    dim = grid.dim
    x = rng.uniform(0.0, grid.extent, size=(samples, dim))
    coefficient = model.field.value_at(x)

    def H(q: np.ndarray) -> np.ndarray:
        return model.evaluate(q, coefficient)

    def scale_of(values: np.ndarray) -> np.ndarray:
        return tol * np.maximum(1.0, np.abs(values))

    p1 = _sample_ball(rng, samples, dim, radius)
    p2 = _sample_ball(rng, samples, dim, radius)
    gap = H(0.5 * (p1 + p2)) - 0.5 * (H(p1) + H(p2))
    worst = int(np.argmax(gap))
    convex_ok = bool(gap[worst] <= scale_of(H(p1) + H(p2))[worst])
    convexity = StructureCheck(
        name="convexity",
        declared=model.convex_in_p,
        passed=convex_ok,
        samples=samples,
        witness=None
        if convex_ok
        else {
            "p1": p1[worst].tolist(),
            "p2": p2[worst].tolist(),
            "x": x[worst].tolist(),
            "midpoint_norm": float(np.linalg.norm(0.5 * (p1[worst] + p2[worst]))),
            "gap": float(gap[worst]),
        },
    )

    lam = rng.uniform(0.0, 3.0, size=samples)
    base = H(p1)
    scaled = H(lam[:, None] * p1)
    error = np.abs(scaled - lam * base)
    worst = int(np.argmax(error - scale_of(lam * base)))
    homog_ok = bool(np.all(error <= scale_of(lam * base)))
    homogeneity = StructureCheck(
        name="homogeneity",
        declared=model.homogeneity_degree == 1.0,
        passed=homog_ok,
        samples=samples,
        witness=None if homog_ok else {"p": p1[worst].tolist(), "lambda": float(lam[worst]), "error": float(error[worst])},
    )

    lam01 = rng.uniform(0.0, 1.0, size=samples)
    inner = H(lam01[:, None] * p1)
    bound = lam01 * base
    violation = np.maximum(-inner, inner - bound)
    worst = int(np.argmax(violation))
    sub_ok = bool(np.all(violation <= scale_of(bound)))
    subhomogeneity = StructureCheck(
        name="subhomogeneity",
        declared=model.subhomogeneous,
        passed=sub_ok,
        samples=samples,
        witness=None if sub_ok else {"p": p1[worst].tolist(), "lambda": float(lam01[worst]), "violation": float(violation[worst])},
    )

    alpha, constant = model.coercivity_constants()
    direction = _sample_ball(rng, samples, dim, 1.0)
    direction /= np.maximum(np.linalg.norm(direction, axis=-1, keepdims=True), 1e-300)
    far = direction * rng.uniform(far_radius, 2.0 * far_radius, size=(samples, 1))
    margin = H(far) - (alpha * np.linalg.norm(far, axis=-1) - constant)
    worst = int(np.argmin(margin))
    coercive_ok = bool(margin[worst] >= 0.0)
    coercivity = StructureCheck(
        name="coercivity",
        declared=model.coercive,
        passed=coercive_ok,
        samples=samples,
        witness=None if coercive_ok else {"p": far[worst].tolist(), "margin": float(margin[worst])},
    )

    return StructureReport(
        family=model.family.value,
        checks=(convexity, homogeneity, subhomogeneity, coercivity),
    )
