from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hjhomog.errors import ParameterError
from hjhomog.grid import GridSpec
from hjhomog.homog import EffectiveEstimate, vanishing_discount
from hjhomog.models import DiffusionSpec, HamiltonianSpec
from hjhomog.solver import SchemeParams, TabulatedHamiltonian

logger = logging.getLogger(__name__)

# Hull orientation tests run on integers: coordinates are rounded to multiples of 2^-40.
LATTICE_SCALE = 2**40
DEFAULT_COLLINEAR_FACTOR = 1e-6


@dataclass(frozen=True, eq=False)
class HbarSample:
    q: tuple[float, ...]
    cbar: float
    uncertainty: float
    estimate: EffectiveEstimate | None = field(default=None, repr=False)


def tabulate_Hbar(
    H: HamiltonianSpec,
    A: DiffusionSpec,
    p_grid: Sequence[Sequence[float] | float],
    deltas: Sequence[float],
    seeds: Sequence[int],
    grid: GridSpec,
    params: SchemeParams,
    *,
    workers: int = 1,
) -> tuple[HbarSample, ...]:
    """One vanishing-discount estimate per momentum; uncertainty = extrapolation residual + final dispersion."""
    if len(p_grid) == 0:
        raise ParameterError("momentum grid is empty", key="p_grid")
    table = []
    for q in p_grid:
        estimate = vanishing_discount(H, A, q, deltas, seeds, grid, params, workers=workers)
        table.append(
            HbarSample(
                q=tuple(float(c) for c in estimate.p),
                cbar=estimate.cbar,
                uncertainty=estimate.uncertainty,
                estimate=estimate,
            )
        )
    return tuple(table)


def as_tabulated_hamiltonian(table: Sequence[HbarSample]) -> TabulatedHamiltonian:
    """Rebuild a piecewise-linear H-bar from a table sampled on a tensor grid of momenta."""
    points = np.array([sample.q for sample in table], dtype=float)
    values = np.array([sample.cbar for sample in table], dtype=float)
    dim = points.shape[1]
    nodes = tuple(np.unique(points[:, axis]) for axis in range(dim))
    if int(np.prod([axis.size for axis in nodes])) != len(table):
        raise ParameterError("momentum table is not a full tensor grid", key="p_grid")
    grid_values = np.full(tuple(axis.size for axis in nodes), np.nan)
    for point, value in zip(points, values):
        index = tuple(int(np.searchsorted(axis, c)) for axis, c in zip(nodes, point))
        grid_values[index] = value
    return TabulatedHamiltonian(nodes=nodes, values=grid_values)


def _lattice_point(point: Sequence[float]) -> tuple[int, int]:
    return (round(point[0] * LATTICE_SCALE), round(point[1] * LATTICE_SCALE))


def _cross(o: tuple[int, int], a: tuple[int, int], b: tuple[int, int]) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def monotone_chain(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the convex hull vertices in counter-clockwise order, collinear points dropped."""
    keyed: dict[tuple[int, int], int] = {}
    for index, point in enumerate(points):
        keyed.setdefault(_lattice_point(point), index)
    ordered = sorted(keyed)
    if len(ordered) <= 2:
        return [keyed[key] for key in ordered]
    lower: list[tuple[int, int]] = []
    for key in ordered:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], key) <= 0:
            lower.pop()
        lower.append(key)
    upper: list[tuple[int, int]] = []
    for key in reversed(ordered):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], key) <= 0:
            upper.pop()
        upper.append(key)
    return [keyed[key] for key in lower[:-1] + upper[:-1]]


def _segment_distance(point: np.ndarray, start: np.ndarray, end: np.ndarray) -> float:
    edge = end - start
    length2 = float(edge @ edge)
    if length2 == 0.0:
        return float(np.linalg.norm(point - start))
    t = min(1.0, max(0.0, float((point - start) @ edge) / length2))
    return float(np.linalg.norm(point - (start + t * edge)))


@dataclass(frozen=True)
class SublevelGeometry:
    level: float
    p: tuple[float, ...]
    p_samples: tuple[tuple[tuple[float, ...], float, float], ...]
    member_flags: tuple[bool, ...]
    hull_vertices: tuple[tuple[float, ...], ...]
    extreme_flags: tuple[bool, ...]
    flat_arc_points: tuple[tuple[float, ...], ...] = ()
    degenerate: bool = False
    tol_collinear: float = 0.0

    @property
    def extreme_points(self) -> tuple[tuple[float, ...], ...]:
        return tuple(vertex for vertex, flag in zip(self.hull_vertices, self.extreme_flags) if flag)

    @property
    def p_is_extreme(self) -> bool:
        return any(np.allclose(vertex, self.p, rtol=0.0, atol=1e-12) for vertex in self.extreme_points)


def _locate(table: Sequence[HbarSample], p: Sequence[float] | float) -> HbarSample:
    target = np.atleast_1d(np.asarray(p, dtype=float))
    for sample in table:
        if len(sample.q) == target.size and np.allclose(sample.q, target, rtol=0.0, atol=1e-12):
            return sample
    raise ParameterError(f"momentum {target.tolist()} is not in the table", key="p")


def sublevel_extremes(
    table: Sequence[HbarSample],
    p: Sequence[float] | float,
    *,
    level: float | None = None,
    tol_collinear: float | None = None,
) -> SublevelGeometry:
    """Members {q : cbar(q) <= level + uncertainty(q)}, their hull and its extreme points."""
    anchor = _locate(table, p)
    level = anchor.cbar if level is None else float(level)
    tol = DEFAULT_COLLINEAR_FACTOR * abs(level) if tol_collinear is None else float(tol_collinear)
    flags = tuple(bool(sample.cbar <= level + sample.uncertainty) for sample in table)
    members = [np.asarray(sample.q) for sample, flag in zip(table, flags) if flag]
    samples = tuple((sample.q, sample.cbar, sample.uncertainty) for sample in table)
    dim = len(anchor.q)

    def report(
        vertices: Sequence[Sequence[float]],
        extreme: Sequence[bool],
        flat: Sequence[Sequence[float]] = (),
        degenerate: bool = False,
    ) -> SublevelGeometry:
        return SublevelGeometry(
            level=level,
            p=anchor.q,
            p_samples=samples,
            member_flags=flags,
            hull_vertices=tuple(tuple(float(c) for c in v) for v in vertices),
            extreme_flags=tuple(extreme),
            flat_arc_points=tuple(tuple(float(c) for c in v) for v in flat),
            degenerate=degenerate,
            tol_collinear=tol,
        )

    if dim == 1:
        values = sorted({float(q[0]) for q in members})
        ends = [values[0], values[-1]] if len(values) > 1 else values
        return report([(v,) for v in ends], [True] * len(ends), degenerate=len(ends) < 2)

    if len(members) < 3:
        logger.info("sublevel set has %d members; reporting a degenerate hull", len(members))
        return report(members, [True] * len(members), degenerate=True)

    vertices = [members[i] for i in monotone_chain(members)]
    if len(vertices) < 3:
        return report(vertices, [True] * len(vertices), degenerate=True)
    extreme = []
    for i, vertex in enumerate(vertices):
        before, after = vertices[i - 1], vertices[(i + 1) % len(vertices)]
        extreme.append(_segment_distance(vertex, before, after) > tol)
    flat = []
    on_hull = {_lattice_point(v) for v in vertices}
    for point in members:
        if _lattice_point(point) in on_hull:
            continue
        edges = zip(vertices, vertices[1:] + vertices[:1])
        if any(_segment_distance(point, a, b) <= tol for a, b in edges):
            flat.append(point)
    flat.extend(v for v, flag in zip(vertices, extreme) if not flag)
    return report(vertices, extreme, flat)


def momentum_in_hull(p: Sequence[float] | float, momenta: Sequence[Sequence[float] | float]) -> bool:
    """Whether p lies in the closed convex hull of the given momenta."""
    target = np.atleast_1d(np.asarray(p, dtype=float))
    points = [np.atleast_1d(np.asarray(m, dtype=float)) for m in momenta]
    if not points:
        return False
    if target.size == 1:
        values = [float(m[0]) for m in points]
        return min(values) - 1e-12 <= float(target[0]) <= max(values) + 1e-12
    hull = [_lattice_point(points[i]) for i in monotone_chain(points)]
    key = _lattice_point(target)
    if len(hull) == 1:
        return key == hull[0]
    if len(hull) == 2:
        a, b = hull
        within = min(a[0], b[0]) <= key[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= key[1] <= max(a[1], b[1])
        return _cross(a, b, key) == 0 and within
    return all(_cross(a, b, key) >= 0 for a, b in zip(hull, hull[1:] + hull[:1]))


@dataclass(frozen=True)
class RadialReport:
    directions: int
    radii: tuple[float, ...]
    spread: float
    spread_passed: bool
    monotone_passed: bool
    witness: dict[str, float | list[float]] | None
    slope: float | None
    fit_residual: float | None
    fit_passed: bool | None

    @property
    def passed(self) -> bool:
        return self.spread_passed and self.monotone_passed and self.fit_passed is not False


def _ray_key(direction: np.ndarray) -> float:
    if direction.size == 1:
        return float(np.sign(direction[0]))
    return round(float(np.arctan2(direction[1], direction[0])), 9)


def radial_checks(
    table: Sequence[HbarSample],
    *,
    homogeneous: bool = False,
    tol_spread: float = 0.03,
    tol_fit: float = 0.03,
) -> RadialReport:
    """Isotropy spread across rays, monotonicity of cbar(s)/s along rays, and an optional linear fit."""
    rays: dict[float, list[tuple[float, HbarSample]]] = {}
    dim = 1
    for sample in table:
        q = np.asarray(sample.q, dtype=float)
        dim = q.size
        s = float(np.linalg.norm(q))
        if s == 0.0:
            continue
        rays.setdefault(_ray_key(q / s), []).append((round(s, 9), sample))
    radii = sorted({s for ray in rays.values() for s, _ in ray})
    need = 2 if dim == 1 else 4
    if len(rays) < need or len(radii) < 3:
        raise ParameterError(
            f"radial table needs >= {need} directions and >= 3 radii, got {len(rays)} and {len(radii)}",
            key="p_grid",
        )

    spread = 0.0
    for s in radii:
        values = np.array([sample.cbar for ray in rays.values() for r, sample in ray if r == s])
        if values.size < 2:
            continue
        scale = float(np.mean(np.abs(values)))
        if scale > 0:
            spread = max(spread, float((values.max() - values.min()) / scale))

    witness = None
    for key, ray in sorted(rays.items()):
        ordered = sorted(ray, key=lambda item: item[0])
        for (s1, a), (s2, b) in zip(ordered, ordered[1:]):
            slack = a.uncertainty / s1 + b.uncertainty / s2
            if a.cbar / s1 < -a.uncertainty / s1 or b.cbar / s2 < a.cbar / s1 - slack:
                witness = {
                    "direction": list(a.q),
                    "s1": s1,
                    "s2": s2,
                    "ratio1": a.cbar / s1,
                    "ratio2": b.cbar / s2,
                }
                break
        if witness is not None:
            break

    slope = fit_residual = fit_passed = None
    if homogeneous:
        s = np.array([r for ray in rays.values() for r, _ in ray])
        c = np.array([sample.cbar for ray in rays.values() for _, sample in ray])
        slope = float(s @ c / (s @ s))
        scale = float(np.max(np.abs(c)))
        fit_residual = float(np.max(np.abs(c - slope * s)) / scale) if scale > 0 else 0.0
        fit_passed = fit_residual <= tol_fit

    return RadialReport(
        directions=len(rays),
        radii=tuple(radii),
        spread=spread,
        spread_passed=spread <= tol_spread,
        monotone_passed=witness is None,
        witness=witness,
        slope=slope,
        fit_residual=fit_residual,
        fit_passed=fit_passed,
    )
