from __future__ import annotations

import numpy as np
import pytest

from hjhomog.errors import ParameterError
from hjhomog.grid import GridSpec


def test_grid_shape_and_coordinates() -> None:
    grid = GridSpec(dim=2, extent=1.0, spacing=0.125)
    assert grid.points_per_axis == 8
    assert grid.shape == (8, 8)
    assert grid.size == 64
    assert grid.coordinates.shape == (8, 8, 2)
    assert grid.coordinates[3, 5].tolist() == [0.375, 0.625]


def test_displacements_are_centered_on_index_zero() -> None:
    grid = GridSpec(dim=1, extent=1.0, spacing=0.125)
    assert grid.displacements[:, 0].tolist() == [0.0, 0.125, 0.25, 0.375, -0.5, -0.375, -0.25, -0.125]
    assert grid.sup_radius.max() == 0.5


@pytest.mark.parametrize(
    ("kwargs", "key"),
    [
        ({"dim": 3, "extent": 1.0, "spacing": 0.125}, "dim"),
        ({"dim": 1, "extent": 0.0, "spacing": 0.125}, "extent"),
        ({"dim": 1, "extent": 1.0, "spacing": 0.5}, "spacing"),
        ({"dim": 1, "extent": 1.0, "spacing": 0.11}, "spacing"),
    ],
)
def test_invalid_grids_name_the_offending_key(kwargs: dict, key: str) -> None:
    with pytest.raises(ParameterError, match=f"^{key}:") as info:
        GridSpec(**kwargs)
    assert info.value.key == key


def test_lattice_shift_rejects_off_lattice_vectors() -> None:
    grid = GridSpec(dim=2, extent=1.0, spacing=0.125)
    assert grid.lattice_shift([0.25, -0.125]) == (2, -1)
    with pytest.raises(ParameterError, match="not a lattice vector"):
        grid.lattice_shift([0.1, 0.0])


def test_from_points_matches_spacing() -> None:
    grid = GridSpec.from_points(dim=1, extent=8.0, points_per_axis=2048)
    assert grid.spacing == 1.0 / 256
    assert grid.describe() == {"dim": 1, "extent": 8.0, "spacing": 1.0 / 256, "points_per_axis": 2048}
    assert np.allclose(grid.wrap(np.array([8.5, -0.5])), [0.5, 7.5])
