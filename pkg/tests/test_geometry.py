from __future__ import annotations

import numpy as np
import pytest

from hjhomog.environment import EnvironmentSpec
from hjhomog.errors import ParameterError
from hjhomog.geometry import (
    HbarSample,
    as_tabulated_hamiltonian,
    momentum_in_hull,
    monotone_chain,
    radial_checks,
    sublevel_extremes,
    tabulate_Hbar,
)
from hjhomog.grid import GridSpec
from hjhomog.models import DiffusionSpec, HamiltonianSpec
from hjhomog.solver import SchemeParams

ANGLES = 2.0 * np.pi * np.arange(8) / 8


def _table(points, value, uncertainty: float = 0.0) -> list[HbarSample]:
    return [
        HbarSample(q=tuple(float(c) for c in q), cbar=float(value(np.asarray(q, dtype=float))), uncertainty=uncertainty)
        for q in points
    ]


def _circle(radius: float) -> list[tuple[float, float]]:
    return [(radius * np.cos(a), radius * np.sin(a)) for a in ANGLES]


def _disk_table() -> list[HbarSample]:
    points = [(1.0, 0.0)] + _circle(1.0)[1:] + _circle(0.5) + [(0.0, 0.0)]
    return _table(points, lambda q: np.linalg.norm(q), uncertainty=1e-9)


def test_strictly_convex_ball_has_every_boundary_point_extreme() -> None:
    geometry = sublevel_extremes(_disk_table(), [1.0, 0.0])
    assert geometry.level == pytest.approx(1.0)
    assert all(geometry.member_flags)
    assert len(geometry.hull_vertices) == 8
    assert all(geometry.extreme_flags)
    assert geometry.p_is_extreme
    assert not geometry.degenerate
    assert geometry.flat_arc_points == ()


def test_one_dimensional_sublevel_interval() -> None:
    table = _table([(q,) for q in np.linspace(-2.0, 2.0, 9)], lambda q: q[0] ** 2)
    geometry = sublevel_extremes(table, [1.0])
    assert geometry.hull_vertices == ((-1.0,), (1.0,))
    assert geometry.extreme_points == ((-1.0,), (1.0,))
    assert sum(geometry.member_flags) == 5


def test_flat_level_set_interior_points_are_members_but_not_extreme() -> None:
    table = _table(_circle(1.0) + _circle(0.5), lambda q: 0.0)
    geometry = sublevel_extremes(table, table[0].q)
    assert all(geometry.member_flags)
    extreme = {tuple(np.round(v, 12)) for v in geometry.extreme_points}
    assert extreme == {tuple(np.round(v, 12)) for v in _circle(1.0)}
    for q in _circle(0.5):
        assert tuple(np.round(q, 12)) not in extreme


def test_points_on_hull_edges_are_reported_as_flat_arcs() -> None:
    points = [(float(a), float(b)) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    table = _table(points, lambda q: np.max(np.abs(q)))
    geometry = sublevel_extremes(table, [1.0, 0.0])
    assert set(geometry.hull_vertices) == {(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)}
    assert set(geometry.flat_arc_points) == {(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)}
    assert not geometry.p_is_extreme


def test_hull_is_idempotent_and_counter_clockwise() -> None:
    points = np.random.default_rng(2).uniform(-1.0, 1.0, size=(40, 2))
    hull = [points[i] for i in monotone_chain(points)]
    again = [hull[i] for i in monotone_chain(hull)]
    assert {tuple(v) for v in again} == {tuple(v) for v in hull}
    for a, b, c in zip(hull, hull[1:] + hull[:1], hull[2:] + hull[:2]):
        assert (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) > 0


def test_membership_is_monotone_in_level() -> None:
    table = _disk_table()
    previous = 0
    for level in (0.0, 0.25, 0.5, 0.75, 1.0, 2.0):
        members = sum(sublevel_extremes(table, [1.0, 0.0], level=level).member_flags)
        assert members >= previous
        previous = members
    assert previous == len(table)


def test_extreme_flags_follow_a_rigid_motion() -> None:
    rng = np.random.default_rng(8)
    points = [tuple(float(c) for c in q) for q in rng.integers(-8, 9, size=(30, 2)) / 8.0]
    points.append((1.0, 0.0))
    value = lambda q: float(q @ q)
    base = sublevel_extremes(_table(points, value), [1.0, 0.0])
    rotated_points = [(-b + 0.5, a - 0.25) for a, b in points]
    moved = sublevel_extremes(_table(rotated_points, lambda q: value(np.array([q[1] + 0.25, -(q[0] - 0.5)]))), [0.5, 0.75])
    expected = {(-b + 0.5, a - 0.25) for a, b in base.extreme_points}
    assert set(moved.extreme_points) == expected


def test_too_few_members_is_a_degenerate_report() -> None:
    table = _table([(0.0, 0.0), (1.0, 0.0), (3.0, 3.0), (4.0, 4.0)], lambda q: float(np.linalg.norm(q)))
    geometry = sublevel_extremes(table, [1.0, 0.0])
    assert geometry.degenerate
    assert set(geometry.extreme_points) == {(0.0, 0.0), (1.0, 0.0)}


def test_momentum_must_be_tabulated() -> None:
    with pytest.raises(ParameterError, match="^p:"):
        sublevel_extremes(_disk_table(), [0.3, 0.3])


def test_momentum_in_hull() -> None:
    square = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    assert momentum_in_hull([0.0, 0.0], square)
    assert momentum_in_hull([1.0, 0.0], square)
    assert not momentum_in_hull([1.5, 0.0], square)
    assert momentum_in_hull([0.5], [[-1.0], [1.0]])
    assert not momentum_in_hull([2.0], [[-1.0], [1.0]])
    assert not momentum_in_hull([0.0, 0.0], [])


def _radial_table(value, directions: int = 8, radii=(0.5, 1.0, 1.5)) -> list[HbarSample]:
    table = []
    for a in 2.0 * np.pi * np.arange(directions) / directions:
        for s in radii:
            table.append(HbarSample(q=(s * np.cos(a), s * np.sin(a)), cbar=float(value(s)), uncertainty=0.0))
    return table


def test_radial_checks_on_a_homogeneous_isotropic_table() -> None:
    report = radial_checks(_radial_table(lambda s: 2.0 * s), homogeneous=True)
    assert report.directions == 8
    assert report.radii == (0.5, 1.0, 1.5)
    assert report.spread == 0.0
    assert report.monotone_passed
    assert report.slope == pytest.approx(2.0)
    assert report.fit_residual == pytest.approx(0.0, abs=1e-12)
    assert report.passed


def test_radial_checks_report_a_monotonicity_witness() -> None:
    report = radial_checks(_radial_table(lambda s: s * (2.0 - s)))
    assert not report.monotone_passed
    assert not report.passed
    assert report.witness["s1"] == 0.5
    assert report.witness["s2"] == 1.0
    assert report.witness["ratio2"] < report.witness["ratio1"]
    assert report.fit_passed is None


def test_radial_checks_measure_directional_spread() -> None:
    table = _radial_table(lambda s: 2.0 * s)
    table[0] = HbarSample(q=table[0].q, cbar=table[0].cbar * 1.1, uncertainty=0.0)
    report = radial_checks(table)
    assert report.spread > 0.03
    assert not report.spread_passed


def test_radial_checks_need_enough_rays() -> None:
    with pytest.raises(ParameterError, match="^p_grid:"):
        radial_checks(_radial_table(lambda s: s, directions=2))
    with pytest.raises(ParameterError, match="^p_grid:"):
        radial_checks(_radial_table(lambda s: s, radii=(0.5, 1.0)))


CONSTANT = EnvironmentSpec(
    family="RandomPhaseTrig",
    params={"level": 2.0, "amplitudes": [0.0], "frequencies": [1.0]},
)


def test_tabulate_constant_eikonal() -> None:
    grid = GridSpec(dim=1, extent=1.0, spacing=1.0 / 8)
    H = HamiltonianSpec(family="Eikonal", environment=CONSTANT)
    table = tabulate_Hbar(
        H, DiffusionSpec(), [[-2.0], [-1.0], [0.0], [1.0], [2.0]], [0.5, 0.25], [0], grid, SchemeParams(stop_tol=1e-10)
    )
    assert [sample.q for sample in table] == [(-2.0,), (-1.0,), (0.0,), (1.0,), (2.0,)]
    assert [sample.cbar for sample in table] == pytest.approx([4.0, 2.0, 0.0, 2.0, 4.0], abs=1e-8)
    assert all(sample.uncertainty <= 1e-8 for sample in table)

    hbar = as_tabulated_hamiltonian(table)
    assert hbar(np.array([[1.5]]))[0] == pytest.approx(3.0, abs=1e-8)

    with pytest.raises(ParameterError, match="^p_grid:"):
        tabulate_Hbar(H, DiffusionSpec(), [], [0.5, 0.25], [0], grid, SchemeParams())
