"""Closed-form and quadrature values of the effective Hamiltonian for 1D periodic models."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from hjhomog.environment import FieldSample
from hjhomog.errors import ParameterError

ScalarField = Callable[[float], float]


def field_function(sample: FieldSample) -> ScalarField:
    if sample.grid.dim != 1:
        raise ParameterError("oracles are one-dimensional", key="dim")
    return lambda x: float(sample.value_at(x))


def _average(f: ScalarField, period: float) -> float:
    value, _ = quad(f, 0.0, period, limit=200)
    return value / period


def harmonic_mean(c: ScalarField, period: float = 1.0) -> float:
    return 1.0 / _average(lambda x: 1.0 / c(x), period)


def trig_harmonic_mean(level: float, amplitude: float) -> float:
    """Harmonic mean of level + amplitude sin(2 pi x) over a period."""
    if not level > abs(amplitude):
        raise ParameterError("level must exceed |amplitude|", key="level")
    return float(np.sqrt(level * level - amplitude * amplitude))


def eikonal_hbar(c: ScalarField, p: float, period: float = 1.0) -> float:
    """H-bar(p) = |p| / <1/c> for H = c(x)|p| in one dimension."""
    return abs(p) * harmonic_mean(c, period)


def quadratic_potential_hbar(V: ScalarField, p: float, period: float = 1.0, samples: int = 2049) -> float:
    """H-bar(p) for H = p^2 - V(x): the root lambda of <sqrt(lambda + V)> = |p|, or -min V on the flat part."""
    xs = np.linspace(0.0, period, samples)
    floor = -float(np.min([V(x) for x in xs]))

    def gap(lam: float) -> float:
        return _average(lambda x: np.sqrt(max(lam + V(x), 0.0)), period) - abs(p)

    if gap(floor) >= 0.0:
        return floor
    upper = max(floor + 1.0, p * p)
    while gap(upper) < 0.0:
        upper = 2.0 * upper + 1.0
    return float(brentq(gap, floor, upper, xtol=1e-13, rtol=1e-13))
