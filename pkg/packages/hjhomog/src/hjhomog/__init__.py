from __future__ import annotations

from importlib import import_module
from typing import TYPE_CHECKING

__version__ = "0.1.0"

_EXPORT_MAP = {
    "ConfigError": ("hjhomog.errors", "ConfigError"),
    "DiffusionModel": ("hjhomog.models", "DiffusionModel"),
    "DiffusionSpec": ("hjhomog.models", "DiffusionSpec"),
    "DomainError": ("hjhomog.errors", "DomainError"),
    "EnvironmentSpec": ("hjhomog.environment", "EnvironmentSpec"),
    "ExtrapolationError": ("hjhomog.errors", "ExtrapolationError"),
    "GeometryError": ("hjhomog.errors", "GeometryError"),
    "GridSpec": ("hjhomog.grid", "GridSpec"),
    "HJHomogError": ("hjhomog.errors", "HJHomogError"),
    "HamiltonianModel": ("hjhomog.models", "HamiltonianModel"),
    "HamiltonianSpec": ("hjhomog.models", "HamiltonianSpec"),
    "NonconvergenceError": ("hjhomog.errors", "NonconvergenceError"),
    "NotApplicableError": ("hjhomog.errors", "NotApplicableError"),
    "ParameterError": ("hjhomog.errors", "ParameterError"),
    "SchemeParams": ("hjhomog.solver", "SchemeParams"),
    "TabulatedHamiltonian": ("hjhomog.solver", "TabulatedHamiltonian"),
    "a_priori_bound": ("hjhomog.homog", "a_priori_bound"),
    "check_assumption_H": ("hjhomog.solver", "check_assumption_H"),
    "check_structure": ("hjhomog.models", "check_structure"),
    "convexcase_variance_decay": ("hjhomog.homog", "convexcase_variance_decay"),
    "corrector_report": ("hjhomog.homog", "corrector_report"),
    "ensemble": ("hjhomog.environment", "ensemble"),
    "estimate_drift": ("hjhomog.homog", "estimate_drift"),
    "eval_A": ("hjhomog.models", "eval_A"),
    "eval_H": ("hjhomog.models", "eval_H"),
    "extract_corrector": ("hjhomog.homog", "extract_corrector"),
    "load_config": ("hjhomog.config", "load_config"),
    "mean_zero_checks": ("hjhomog.homog", "mean_zero_checks"),
    "momentum_in_hull": ("hjhomog.geometry", "momentum_in_hull"),
    "radial_checks": ("hjhomog.geometry", "radial_checks"),
    "run": ("hjhomog.pipelines", "run"),
    "sample_field": ("hjhomog.environment", "sample_field"),
    "shift_field": ("hjhomog.environment", "shift_field"),
    "solve_discounted": ("hjhomog.solver", "solve_discounted"),
    "solve_effective": ("hjhomog.solver", "solve_effective"),
    "solve_oscillatory": ("hjhomog.solver", "solve_oscillatory"),
    "sublevel_extremes": ("hjhomog.geometry", "sublevel_extremes"),
    "tabulate_Hbar": ("hjhomog.geometry", "tabulate_Hbar"),
    "theta_distance": ("hjhomog.homog", "theta_distance"),
    "vanishing_discount": ("hjhomog.homog", "vanishing_discount"),
    "verify": ("hjhomog.verify", "verify"),
}

__all__ = sorted(_EXPORT_MAP.keys())


def __getattr__(name: str):
    target = _EXPORT_MAP.get(name)
    if target is None:
        raise AttributeError(f"module 'hjhomog' has no attribute {name!r}")
    module_name, attr_name = target
    module = import_module(module_name)
    value = getattr(module, attr_name)
    globals()[name] = value
    return value


def __dir__() -> list[str]:
    return sorted(set(globals().keys()) | set(__all__))


if TYPE_CHECKING:
    from hjhomog.config import load_config
    from hjhomog.environment import EnvironmentSpec, ensemble, sample_field, shift_field
    from hjhomog.errors import (
        ConfigError,
        DomainError,
        ExtrapolationError,
        GeometryError,
        HJHomogError,
        NonconvergenceError,
        NotApplicableError,
        ParameterError,
    )
    from hjhomog.geometry import momentum_in_hull, radial_checks, sublevel_extremes, tabulate_Hbar
    from hjhomog.grid import GridSpec
    from hjhomog.homog import (
        a_priori_bound,
        convexcase_variance_decay,
        corrector_report,
        estimate_drift,
        extract_corrector,
        mean_zero_checks,
        theta_distance,
        vanishing_discount,
    )
    from hjhomog.models import (
        DiffusionModel,
        DiffusionSpec,
        HamiltonianModel,
        HamiltonianSpec,
        check_structure,
        eval_A,
        eval_H,
    )
    from hjhomog.pipelines import run
    from hjhomog.solver import (
        SchemeParams,
        TabulatedHamiltonian,
        check_assumption_H,
        solve_discounted,
        solve_effective,
        solve_oscillatory,
    )
    from hjhomog.verify import verify
