from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

from hjhomog.errors import ParameterError
from hjhomog.grid import GridSpec

logger = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1


class EnvironmentFamily(str, Enum):
    RANDOM_PHASE_TRIG = "RandomPhaseTrig"
    POISSON_BUMPS = "PoissonBumps"
    RANDOM_CHECKERBOARD = "RandomCheckerboard"


class FieldRole(str, Enum):
    SPEED = "speed"
    POTENTIAL = "potential"
    COEFFICIENT = "coefficient"


_FAMILY_DEFAULTS: dict[EnvironmentFamily, dict[str, Any]] = {
    EnvironmentFamily.RANDOM_PHASE_TRIG: {
        "level": 2.0,
        "amplitudes": [1.0],
        "frequencies": [1.0],
    },
    EnvironmentFamily.POISSON_BUMPS: {
        "floor": 1.0,
        "height": 1.0,
        "radius": 0.25,
        "density": 1.0,
    },
    EnvironmentFamily.RANDOM_CHECKERBOARD: {
        "low": 1.0,
        "high": 3.0,
        "cell": 1.0,
    },
}

# Key that carries the lower end of the declared range, per family.
_FLOOR_KEY = {
    EnvironmentFamily.RANDOM_PHASE_TRIG: "level",
    EnvironmentFamily.POISSON_BUMPS: "floor",
    EnvironmentFamily.RANDOM_CHECKERBOARD: "low",
}


def _bump_profile(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def _bump_max_slope() -> float:
    s = np.linspace(0.0, 1.0, 20001)[:-1]
    slope = np.abs(_bump_profile(s) * 2.0 * s / (1.0 - s**2) ** 2)
    return float(np.max(slope))


_BUMP_MAX_SLOPE = _bump_max_slope()

# The dihedral group of the square lattice as integer matrices.
_DIHEDRAL_2D = (
    np.array([[1, 0], [0, 1]]),
    np.array([[0, -1], [1, 0]]),
    np.array([[-1, 0], [0, -1]]),
    np.array([[0, 1], [-1, 0]]),
    np.array([[1, 0], [0, -1]]),
    np.array([[-1, 0], [0, 1]]),
    np.array([[0, 1], [1, 0]]),
    np.array([[0, -1], [-1, 0]]),
)


@dataclass(frozen=True)
class EnvironmentSpec:
    family: EnvironmentFamily
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    isotropize: bool = False
    role: FieldRole = FieldRole.SPEED

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", EnvironmentFamily(self.family))
        object.__setattr__(self, "role", FieldRole(self.role))
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ParameterError("seed must be a 64-bit unsigned integer", key="seed")
        defaults = _FAMILY_DEFAULTS[self.family]
        for key in self.params:
            if key not in defaults:
                raise ParameterError(
                    f"unknown parameter for {self.family.value}; expected one of {sorted(defaults)}",
                    key=key,
                )

    def resolved_params(self) -> dict[str, Any]:
        merged = dict(_FAMILY_DEFAULTS[self.family])
        merged.update(self.params)
        return merged

    def with_seed(self, seed: int) -> "EnvironmentSpec":
        return replace(self, seed=int(seed))


class _Realization(Protocol):
    lower: float
    upper: float
    lipschitz: float

    def evaluate(self, points: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class _TrigRealization:
    level: float
    amplitudes: np.ndarray
    wavevectors: np.ndarray
    phases: np.ndarray

    @property
    def lower(self) -> float:
        return self.level - float(np.sum(np.abs(self.amplitudes)))

    @property
    def upper(self) -> float:
        return self.level + float(np.sum(np.abs(self.amplitudes)))

    @property
    def lipschitz(self) -> float:
        norms = np.linalg.norm(self.wavevectors, axis=-1)
        return float(2.0 * np.pi * np.sum(np.abs(self.amplitudes) * norms))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if self.amplitudes.size == 0:
            return np.full(points.shape[:-1], self.level)
        arg = points @ self.wavevectors.T + self.phases
        return self.level + np.sin(2.0 * np.pi * arg) @ self.amplitudes


@dataclass(frozen=True, eq=False)
class _BumpRealization:
    """floor + height * sum of bumps; ``overlap`` bounds how many supports meet at one point."""

    floor: float
    height: float
    radius: float
    centers: np.ndarray
    extent: float
    overlap: int

    @property
    def lower(self) -> float:
        return self.floor

    @property
    def upper(self) -> float:
        return self.floor + self.height * self.overlap

    @property
    def lipschitz(self) -> float:
        return self.height * self.overlap * _BUMP_MAX_SLOPE / self.radius

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        flat = points.reshape(-1, points.shape[-1])
        total = np.zeros(flat.shape[0])
        for center in self.centers:
            diff = flat - center
            diff -= self.extent * np.rint(diff / self.extent)
            rho = np.linalg.norm(diff, axis=-1) / self.radius
            total += _bump_profile(rho)
        return (self.floor + self.height * total).reshape(points.shape[:-1])


def _support_overlap(centers: np.ndarray, radius: float, extent: float) -> int:
    """Largest number of centres within 2 * radius of one centre, itself included.

    Supports meeting at a point are pairwise closer than 2 * radius, so this
    bounds the number of bumps that are positive anywhere at once.
    """
    if centers.shape[0] == 0:
        return 0
    diff = centers[:, None, :] - centers[None, :, :]
    diff -= extent * np.rint(diff / extent)
    close = np.linalg.norm(diff, axis=-1) < 2.0 * radius
    return int(np.max(np.sum(close, axis=1)))


@dataclass(frozen=True, eq=False)
class _CheckerRealization:
    low: float
    high: float
    cell: float
    table: np.ndarray
    offset: np.ndarray
    symmetry: np.ndarray
    extent: float

    @property
    def lower(self) -> float:
        return min(self.low, self.high)

    @property
    def upper(self) -> float:
        return max(self.low, self.high)

    @property
    def lipschitz(self) -> float:
        dim = self.offset.shape[0]
        return float(np.sqrt(dim) * abs(self.high - self.low) / self.cell)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        dim = self.offset.shape[0]
        cells = self.table.shape[0]
        mapped = points @ self.symmetry.T
        # Cell values sit at cell centres; multilinear interpolation between them.
        y = (mapped + self.offset) / self.cell - 0.5
        base = np.floor(y)
        frac = y - base
        base = base.astype(np.int64)
        out = np.zeros(points.shape[:-1])
        for corner in np.ndindex(*([2] * dim)):
            weight = np.ones(points.shape[:-1])
            index = []
            for axis, bit in enumerate(corner):
                weight = weight * (frac[..., axis] if bit else 1.0 - frac[..., axis])
                index.append(np.mod(base[..., axis] + bit, cells))
            out += weight * self.table[tuple(index)]
        return self.low + (self.high - self.low) * out


@dataclass(frozen=True, eq=False)
class FieldSample:
    grid: GridSpec
    values: np.ndarray
    shift: np.ndarray
    spec: EnvironmentSpec
    realization: Any = field(repr=False)

    @property
    def floor(self) -> float:
        return float(self.realization.lower)

    @property
    def cap(self) -> float:
        return float(self.realization.upper)

    @property
    def lipschitz(self) -> float:
        return float(self.realization.lipschitz)

    def value_at(self, x: np.ndarray | Sequence[float] | float) -> np.ndarray | float:
        """Analytic value at one point or at points of shape (..., dim).

        In 1D a flat array of several abscissae is accepted as well.
        """
        dim = self.grid.dim
        points = np.asarray(x, dtype=float)
        scalar = points.ndim == 0 or (points.ndim == 1 and points.shape[0] == dim)
        if scalar:
            points = points.reshape(1, dim)
        elif points.ndim == 1 and dim == 1:
            points = points[:, None]
        out = self.realization.evaluate(self.grid.wrap(points + self.shift))
        return float(out.reshape(-1)[0]) if scalar else out


def _as_float_list(raw: Any, key: str) -> list[float]:
    if isinstance(raw, (int, float)):
        return [float(raw)]
    try:
        return [float(item) for item in raw]
    except (TypeError, ValueError) as exc:
        raise ParameterError("must be a number or a list of numbers", key=key) from exc


def _wavevectors(raw: Any, count: int, dim: int) -> np.ndarray:
    if isinstance(raw, (int, float)):
        raw = [raw] * count
    if len(raw) != count:
        raise ParameterError(f"expected {count} entries to match amplitudes", key="frequencies")
    vectors = np.zeros((count, dim))
    for index, item in enumerate(raw):
        if isinstance(item, (int, float)):
            # Scalar frequencies point along the axes in turn.
            vectors[index, index % dim] = float(item)
            continue
        components = _as_float_list(item, "frequencies")
        if len(components) != dim:
            raise ParameterError(f"wavevector #{index} must have {dim} components", key="frequencies")
        vectors[index] = components
    return vectors


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _realize_trig(params: dict[str, Any], grid: GridSpec, rng: np.random.Generator, isotropize: bool) -> _TrigRealization:
    amplitudes = np.asarray(_as_float_list(params["amplitudes"], "amplitudes"))
    wavevectors = _wavevectors(params["frequencies"], amplitudes.size, grid.dim)
    extent = grid.extent
    if isotropize:
        if grid.dim == 2:
            rotated = wavevectors @ _rotation(rng.uniform(0.0, 2.0 * np.pi)).T
        else:
            rotated = wavevectors * rng.choice((-1.0, 1.0))
        snapped = np.rint(rotated * extent) / extent
        lost = (np.linalg.norm(snapped, axis=-1) == 0) & (np.linalg.norm(wavevectors, axis=-1) > 0)
        if np.any(lost):
            raise ParameterError("frequencies too low to isotropize on this extent", key="frequencies")
        wavevectors = snapped
    scaled = wavevectors * extent
    if np.max(np.abs(scaled - np.rint(scaled)), initial=0.0) > 1e-9:
        raise ParameterError(
            f"frequency * extent must be integer for a periodic field (extent={extent:g})",
            key="frequencies",
        )
    phases = rng.uniform(0.0, 1.0, size=amplitudes.size)
    return _TrigRealization(
        level=float(params["level"]),
        amplitudes=amplitudes,
        wavevectors=wavevectors,
        phases=phases,
    )


def _realize_bumps(params: dict[str, Any], grid: GridSpec, rng: np.random.Generator) -> _BumpRealization:
    height = float(params["height"])
    radius = float(params["radius"])
    density = float(params["density"])
    if height < 0:
        raise ParameterError("must be >= 0", key="height")
    if not 0 < radius <= grid.extent / 2:
        raise ParameterError("must lie in (0, extent/2]", key="radius")
    if density < 0:
        raise ParameterError("must be >= 0", key="density")
    count = int(rng.poisson(density * grid.extent**grid.dim))
    centers = rng.uniform(0.0, grid.extent, size=(count, grid.dim))
    return _BumpRealization(
        floor=float(params["floor"]),
        height=height,
        radius=radius,
        centers=centers,
        extent=grid.extent,
        overlap=_support_overlap(centers, radius, grid.extent),
    )


def _realize_checkerboard(
    params: dict[str, Any], grid: GridSpec, rng: np.random.Generator, isotropize: bool
) -> _CheckerRealization:
    cell = float(params["cell"])
    if not cell > 0:
        raise ParameterError("must be > 0", key="cell")
    cells = round(grid.extent / cell)
    if cells < 1 or abs(cells * cell - grid.extent) > 1e-9 * grid.extent:
        raise ParameterError("extent must be a multiple of the cell size", key="cell")
    table = rng.integers(0, 2, size=(cells,) * grid.dim).astype(float)
    offset = rng.uniform(0.0, cell, size=grid.dim)
    symmetry = np.eye(grid.dim)
    if isotropize:
        if grid.dim == 2:
            symmetry = _DIHEDRAL_2D[int(rng.integers(0, len(_DIHEDRAL_2D)))].astype(float)
        else:
            symmetry = np.array([[rng.choice((-1.0, 1.0))]])
    return _CheckerRealization(
        low=float(params["low"]),
        high=float(params["high"]),
        cell=cell,
        table=table,
        offset=offset,
        symmetry=symmetry,
        extent=grid.extent,
    )


def _check_range(spec: EnvironmentSpec, realization: _Realization) -> None:
    key = _FLOOR_KEY[spec.family]
    if realization.upper < realization.lower:
        raise ParameterError("declared range is empty", key=key)
    if spec.role in (FieldRole.SPEED, FieldRole.COEFFICIENT) and not realization.lower > 0:
        raise ParameterError(
            f"{spec.role.value} field needs a positive floor, declared floor is {realization.lower:g}",
            key=key,
        )
    if spec.role is FieldRole.POTENTIAL and realization.lower < 0:
        raise ParameterError(
            f"potential field must be >= 0, declared floor is {realization.lower:g}",
            key=key,
        )


def _realize(spec: EnvironmentSpec, grid: GridSpec) -> _Realization:
    params = spec.resolved_params()
    rng = np.random.default_rng(int(spec.seed))
    if spec.family is EnvironmentFamily.RANDOM_PHASE_TRIG:
        realization: _Realization = _realize_trig(params, grid, rng, spec.isotropize)
    elif spec.family is EnvironmentFamily.POISSON_BUMPS:
        realization = _realize_bumps(params, grid, rng)
    else:
        realization = _realize_checkerboard(params, grid, rng, spec.isotropize)
    _check_range(spec, realization)
    return realization


def sample_field(spec: EnvironmentSpec, grid: GridSpec) -> FieldSample:
    realization = _realize(spec, grid)
    values = realization.evaluate(grid.coordinates)
    logger.debug("sampled %s seed=%d on %s", spec.family.value, spec.seed, grid.shape)
    return FieldSample(
        grid=grid,
        values=values,
        shift=np.zeros(grid.dim),
        spec=spec,
        realization=realization,
    )


def shift_field(sample: FieldSample, z: np.ndarray | Sequence[float] | float) -> FieldSample:
    """Translate the environment: new.value(x) == old.value(x + z)."""
    grid = sample.grid
    offset = np.asarray(z, dtype=float).reshape(grid.dim)
    shift = grid.wrap(sample.shift + offset)
    values = sample.realization.evaluate(grid.wrap(grid.coordinates + shift))
    return replace(sample, values=values, shift=shift)


def ensemble(spec: EnvironmentSpec, grid: GridSpec, seeds: Sequence[int]) -> list[FieldSample]:
    if len(set(seeds)) != len(seeds):
        duplicates = sorted({seed for seed in seeds if list(seeds).count(seed) > 1})
        raise ParameterError(f"duplicate seeds {duplicates}", key="seeds")
    return [sample_field(spec.with_seed(seed), grid) for seed in seeds]
