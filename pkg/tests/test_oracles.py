from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from hjhomog.environment import EnvironmentSpec, sample_field
from hjhomog.errors import ParameterError
from hjhomog.grid import GridSpec
from hjhomog.oracles import (
    eikonal_hbar,
    field_function,
    harmonic_mean,
    quadratic_potential_hbar,
    trig_harmonic_mean,
)


def _speed(x: float) -> float:
    return 2.0 + np.sin(2.0 * np.pi * x)


def _potential(x: float) -> float:
    return 1.0 - np.cos(2.0 * np.pi * x)


def test_trig_harmonic_mean_closed_form() -> None:
    assert trig_harmonic_mean(2.0, 1.0) == pytest.approx(np.sqrt(3.0))
    assert harmonic_mean(_speed) == pytest.approx(np.sqrt(3.0), rel=1e-10)
    with pytest.raises(ParameterError, match="^level:"):
        trig_harmonic_mean(1.0, 1.0)


def test_eikonal_oracle_is_linear_in_abs_p() -> None:
    assert eikonal_hbar(_speed, 1.0) == pytest.approx(np.sqrt(3.0), rel=1e-10)
    assert eikonal_hbar(_speed, -2.0) == pytest.approx(2.0 * np.sqrt(3.0), rel=1e-10)
    assert eikonal_hbar(lambda x: 2.0, 1.5) == pytest.approx(3.0)


def test_quadratic_potential_oracle_solves_the_cell_average() -> None:
    lam = quadratic_potential_hbar(_potential, 2.0)
    average, _ = quad(lambda x: np.sqrt(lam + _potential(x)), 0.0, 1.0)
    assert average == pytest.approx(2.0, abs=1e-9)
    assert quadratic_potential_hbar(lambda x: 1.0, 2.0) == pytest.approx(3.0, abs=1e-9)


def test_quadratic_potential_oracle_is_flat_near_zero() -> None:
    assert quadratic_potential_hbar(_potential, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert quadratic_potential_hbar(_potential, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_oracle_periods_follow_the_box() -> None:
    grid = GridSpec(dim=1, extent=4.0, spacing=1.0 / 16)
    sample = sample_field(
        EnvironmentSpec(
            family="RandomPhaseTrig",
            params={"level": 2.0, "amplitudes": [1.0], "frequencies": [1.0]},
            seed=3,
        ),
        grid,
    )
    c = field_function(sample)
    assert c(0.5) == pytest.approx(sample.values[8])
    assert eikonal_hbar(c, 1.0, period=grid.extent) == pytest.approx(np.sqrt(3.0), rel=1e-8)


def test_oracles_are_one_dimensional() -> None:
    grid = GridSpec(dim=2, extent=1.0, spacing=1.0 / 8)
    sample = sample_field(EnvironmentSpec(family="PoissonBumps"), grid)
    with pytest.raises(ParameterError, match="^dim:"):
        field_function(sample)
