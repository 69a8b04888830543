from __future__ import annotations

import numpy as np
import pytest

from hjhomog.environment import EnvironmentSpec, sample_field
from hjhomog.errors import DomainError, ParameterError
from hjhomog.grid import GridSpec
from hjhomog.models import (
    DiffusionFamily,
    DiffusionModel,
    DiffusionSpec,
    HamiltonianFamily,
    HamiltonianModel,
    HamiltonianSpec,
    check_structure,
    eval_A,
    eval_H,
)

GRID = GridSpec(dim=2, extent=1.0, spacing=1.0 / 16)
TRIG = EnvironmentSpec(
    family="RandomPhaseTrig",
    params={"level": 2.0, "amplitudes": [0.5, 0.5], "frequencies": [[1.0, 0.0], [0.0, 1.0]]},
    seed=11,
)


def _model(family: str, params: dict | None = None) -> HamiltonianModel:
    environment = EnvironmentSpec(family="RandomPhaseTrig", params=params or dict(TRIG.params), seed=TRIG.seed)
    return HamiltonianSpec(family=family, environment=environment).build(GRID)


def test_eval_h_matches_closed_forms() -> None:
    x = [0.3, 0.7]
    eikonal = _model("Eikonal")
    c = eikonal.field.value_at(x)
    assert eval_H(eikonal, [3.0, 4.0], x) == pytest.approx(5.0 * c, rel=1e-14)

    quadratic = _model("QuadraticPotential")
    V = quadratic.field.value_at(x)
    assert eval_H(quadratic, [1.0, 2.0], x) == pytest.approx(5.0 - V, rel=1e-14)

    well = _model("DoubleWell")
    assert eval_H(well, [1.0, 0.0], x) == pytest.approx(-V, rel=1e-14)
    assert eval_H(well, [0.0, 0.0], x) == pytest.approx(1.0 - V, rel=1e-14)


def test_eval_a_families() -> None:
    x = [0.1, 0.2]
    assert np.array_equal(eval_A(DiffusionModel(family="Zero"), [1.0, 0.0], x), np.zeros((2, 2)))
    isotropic = DiffusionModel(family="Isotropic", nu=0.3)
    assert np.allclose(eval_A(isotropic, [1.0, 0.0], x), 0.3 * np.eye(2))
    projection = DiffusionModel(family="CurvatureProjection", nu=0.5)
    assert np.allclose(eval_A(projection, [2.0, 0.0], x), [[0.0, 0.0], [0.0, 0.5]])
    with pytest.raises(DomainError, match="p = 0"):
        eval_A(projection, [0.0, 0.0], x)


@pytest.mark.parametrize("p", [[1.0, 0.0], [0.3, -2.0], [1.0, 1.0]])
def test_projection_diffusion_is_a_rank_deficient_projector(p: list[float]) -> None:
    projection = DiffusionModel(family="CurvatureProjection", nu=0.4)
    A = eval_A(projection, p, [0.2, 0.7])
    assert np.trace(A) == pytest.approx(0.4 * (2 - 1), abs=1e-14)
    assert np.linalg.eigvalsh(A) == pytest.approx([0.0, 0.4], abs=1e-12)
    assert np.allclose(A @ np.asarray(p), 0.0, atol=1e-12)
    assert np.array_equal(eval_A(projection, [2.0], 0.3), np.zeros((1, 1)))


def test_diffusion_coefficient_field_is_floored() -> None:
    field = sample_field(TRIG, GRID)
    model = DiffusionModel(family="Isotropic", field=field, nu=0.1, nu_min=0.2)
    assert np.all(model.lattice_coefficient(GRID) >= 0.2)
    assert model.nu_max(GRID) == pytest.approx(max(0.2, 0.1 * field.values.max()))
    assert not DiffusionModel(family="CurvatureProjection").p_independent
    with pytest.raises(ParameterError, match="^nu:"):
        DiffusionModel(family="Isotropic", nu=-1.0)


def test_diffusion_spec_rebuilds_field_per_seed() -> None:
    spec = DiffusionSpec(family="Isotropic", nu=0.1, environment=TRIG)
    a = spec.build(GRID, seed=1)
    b = spec.build(GRID, seed=2)
    assert a.family is DiffusionFamily.ISOTROPIC
    assert not np.array_equal(a.lattice_coefficient(GRID), b.lattice_coefficient(GRID))
    assert DiffusionSpec().build(GRID).nu_max(GRID) == 0.0


def test_structural_flags() -> None:
    eikonal = _model("Eikonal")
    assert eikonal.convex_in_p and eikonal.homogeneity_degree == 1.0 and eikonal.subhomogeneous
    well = _model("DoubleWell")
    assert not well.convex_in_p
    assert well.homogeneity_degree is None
    assert well.family is HamiltonianFamily.DOUBLE_WELL


@pytest.mark.parametrize("family", ["Eikonal", "QuadraticPotential"])
def test_declared_properties_survive_sampling(family: str) -> None:
    report = check_structure(_model(family), samples=500, seed=4)
    assert report.passed
    assert report.check("convexity").passed
    assert report.check("coercivity").passed


def test_double_well_convexity_is_refuted_with_witness() -> None:
    report = check_structure(_model("DoubleWell"), samples=500, seed=4)
    convexity = report.check("convexity")
    assert not convexity.declared
    assert not convexity.passed
    assert convexity.witness is not None
    assert convexity.witness["gap"] > 0
    assert report.passed


def test_eikonal_homogeneity_checks() -> None:
    report = check_structure(_model("Eikonal"), samples=300, seed=9)
    assert report.check("homogeneity").passed
    assert report.check("subhomogeneity").passed
    quadratic = check_structure(_model("QuadraticPotential"), samples=300, seed=9)
    assert not quadratic.check("homogeneity").declared
    assert not quadratic.check("homogeneity").passed


def test_dissipation_and_coercivity_bounds() -> None:
    eikonal = _model("Eikonal")
    assert eikonal.dissipation_bound(5.0) == pytest.approx(eikonal.field.cap)
    assert eikonal.coercivity_radius(3.0) == pytest.approx(3.0 / eikonal.field.floor)
    quadratic = _model("QuadraticPotential")
    assert quadratic.dissipation_bound(1.5) == pytest.approx(3.0)
    assert quadratic.coercivity_radius(2.0) == pytest.approx(np.sqrt(2.0 + quadratic.field.cap))


def test_a_priori_bound_is_lattice_max_of_abs_h() -> None:
    quadratic = _model("QuadraticPotential")
    expected = np.max(np.abs(1.0 - quadratic.field.values))
    assert quadratic.a_priori_bound([1.0, 0.0]) == pytest.approx(expected)
    assert quadratic.lattice_values([1.0, 0.0]).shape == GRID.shape


def test_shifted_model_translates_coefficient() -> None:
    eikonal = _model("Eikonal")
    moved = eikonal.shifted([0.25, 0.0])
    assert np.allclose(moved.field.values, np.roll(eikonal.field.values, -4, axis=0), atol=1e-12)


def test_eikonal_requires_positive_speed() -> None:
    potential = sample_field(
        EnvironmentSpec(
            family="RandomPhaseTrig",
            params={"level": 1.0, "amplitudes": [1.0], "frequencies": [1.0]},
            role="potential",
        ),
        GRID,
    )
    with pytest.raises(ParameterError, match="positive floor"):
        HamiltonianModel(family="Eikonal", field=potential)
