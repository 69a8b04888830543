from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from hjhomog.errors import ParameterError

MIN_POINTS_PER_AXIS = 8


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [0, extent)^dim sampled with spacing h."""

    dim: int
    extent: float
    spacing: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ParameterError("dim must be 1 or 2", key="dim")
        if not self.extent > 0:
            raise ParameterError("extent must be > 0", key="extent")
        if not self.spacing > 0:
            raise ParameterError("spacing must be > 0", key="spacing")
        n = round(self.extent / self.spacing)
        if n < MIN_POINTS_PER_AXIS:
            raise ParameterError(
                f"grid needs at least {MIN_POINTS_PER_AXIS} points per axis, got {n}",
                key="spacing",
            )
        if abs(self.spacing * n - self.extent) > 1e-12 * self.extent:
            raise ParameterError(
                f"extent {self.extent!r} is not a multiple of spacing {self.spacing!r}",
                key="spacing",
            )

    @classmethod
    def from_points(cls, dim: int, extent: float, points_per_axis: int) -> "GridSpec":
        return cls(dim=dim, extent=extent, spacing=extent / points_per_axis)

    @property
    def points_per_axis(self) -> int:
        return round(self.extent / self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Lattice points i*h, shape (*shape, dim), 'ij' indexing."""
        axis = np.arange(self.points_per_axis, dtype=float) * self.spacing
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def displacements(self) -> np.ndarray:
        """Signed periodic displacement from index 0, components in [-L/2, L/2)."""
        n = self.points_per_axis
        index = np.arange(n)
        signed = (index + n // 2) % n - n // 2
        axis = signed.astype(float) * self.spacing
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def sup_radius(self) -> np.ndarray:
        return np.max(np.abs(self.displacements), axis=-1)

    def wrap(self, points: np.ndarray) -> np.ndarray:
        return np.mod(points, self.extent)

    def lattice_shift(self, z: np.ndarray | list[float] | tuple[float, ...]) -> tuple[int, ...]:
        """Index offsets of a lattice vector z; raises if z is off-lattice."""
        steps = np.asarray(z, dtype=float).reshape(self.dim) / self.spacing
        rounded = np.rint(steps)
        if np.max(np.abs(steps - rounded)) > 1e-9:
            raise ParameterError(f"shift {list(np.atleast_1d(z))} is not a lattice vector", key="shift")
        return tuple(int(k) for k in rounded)

    def describe(self) -> dict[str, float | int]:
        return {
            "dim": self.dim,
            "extent": self.extent,
            "spacing": self.spacing,
            "points_per_axis": self.points_per_axis,
        }
