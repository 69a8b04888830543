from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd

from hjhomog.artifacts import ArtifactStore
from hjhomog.config import ResolvedConfig, resolve_config
from hjhomog.errors import ParameterError
from hjhomog.oracles import eikonal_hbar, field_function, quadratic_potential_hbar
from hjhomog.pipelines import RunRecord, run_config
from hjhomog.solver import build_discounted_scheme

logger = logging.getLogger(__name__)

SUITES = ("oracle-1d", "radial-2d", "convex-variance", "assumption-H", "comparison")

ORACLE_TOLERANCE = 0.02
ASSUMPTION_SPREAD = 0.10
COMPARISON_PAIRS = 100
COMPARISON_ROUNDING = 1e-12

_DELTAS = [0.2, 0.1, 0.05, 0.025]

_TRIG_1D = {
    "family": "RandomPhaseTrig",
    "params": {"level": 2.0, "amplitudes": [1.0], "frequencies": [1.0]},
}

_ORACLE_EIKONAL: dict[str, Any] = {
    "experiment": "homog",
    "environment": _TRIG_1D,
    "hamiltonian": {"family": "Eikonal"},
    "numerics": {"dim": 1, "extent": 8.0, "spacing": 1.0 / 256},
    "sweep": {"p": [1.0], "deltas": _DELTAS, "seeds": list(range(8))},
}

_ORACLE_QUADRATIC: dict[str, Any] = {
    "experiment": "homog",
    "environment": {
        "family": "RandomPhaseTrig",
        "params": {"level": 1.0, "amplitudes": [1.0], "frequencies": [1.0]},
    },
    "hamiltonian": {"family": "QuadraticPotential"},
    "numerics": {"dim": 1, "extent": 8.0, "spacing": 1.0 / 256},
    "sweep": {"p": [2.0], "deltas": _DELTAS, "seeds": list(range(8))},
}

_RADIAL_ENVIRONMENT = {
    "family": "RandomPhaseTrig",
    "params": {"level": 2.0, "amplitudes": [0.5, 0.5], "frequencies": [[1.0, 0.0], [0.0, 1.0]]},
    "isotropize": True,
}

_RADIAL: dict[str, Any] = {
    "experiment": "verify-radial",
    "environment": _RADIAL_ENVIRONMENT,
    "hamiltonian": {"family": "Eikonal"},
    "numerics": {"dim": 2, "extent": 4.0, "spacing": 1.0 / 64},
    "sweep": {"deltas": _DELTAS, "seeds": list(range(16)), "directions": 8, "radii": [0.5, 1.0, 1.5]},
}

_RADIAL_CORRECTOR: dict[str, Any] = {
    **_RADIAL,
    "experiment": "corrector",
    "sweep": {"p": [1.0, 0.0], "deltas": _DELTAS, "seeds": list(range(16))},
}

_CONVEX: dict[str, Any] = {
    **_ORACLE_QUADRATIC,
    "experiment": "verify-convex",
    "sweep": {"p": [2.0], "deltas": _DELTAS, "seeds": list(range(32)), "threshold": 0.05},
}

_ASSUMPTION: dict[str, Any] = {
    **_ORACLE_EIKONAL,
    "experiment": "solve",
    "sweep": {"p": [1.0], "deltas": _DELTAS, "seeds": [0]},
}

_COMPARISON: dict[str, Any] = {
    "experiment": "solve",
    "environment": _TRIG_1D,
    "hamiltonian": {"family": "Eikonal"},
    "numerics": {"dim": 1, "extent": 1.0, "spacing": 1.0 / 64},
    "sweep": {"p": [1.0], "deltas": [0.1], "seeds": [0]},
}

_COMPARISON_ISOTROPIC: dict[str, Any] = {
    **_COMPARISON,
    "diffusion": {"family": "Isotropic", "nu": 0.05},
}

_COMPARISON_PROJECTION: dict[str, Any] = {
    "experiment": "solve",
    "environment": {
        "family": "RandomPhaseTrig",
        "params": {"level": 2.0, "amplitudes": [0.5, 0.5], "frequencies": [[1.0, 0.0], [0.0, 1.0]]},
        "seed": 3,
    },
    "hamiltonian": {"family": "Eikonal"},
    "diffusion": {"family": "CurvatureProjection", "nu": 0.05},
    "numerics": {"dim": 2, "extent": 1.0, "spacing": 1.0 / 16},
    "sweep": {"p": [1.0, 0.3], "deltas": [0.1], "seeds": [0]},
}

SUITE_CONFIGS: dict[str, dict[str, dict[str, Any]]] = {
    "oracle-1d": {"eikonal": _ORACLE_EIKONAL, "quadratic": _ORACLE_QUADRATIC},
    "radial-2d": {"radial": _RADIAL, "corrector": _RADIAL_CORRECTOR},
    "convex-variance": {"variance": _CONVEX},
    "assumption-H": {"solve": _ASSUMPTION},
    "comparison": {
        "comparison": _COMPARISON,
        "isotropic": _COMPARISON_ISOTROPIC,
        "projection": _COMPARISON_PROJECTION,
    },
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyResult:
    suite: str
    output_dir: Path
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> CheckResult | None:
        return next((check for check in self.checks if not check.passed), None)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _relative(value: float, target: float) -> float:
    return abs(value - target) / abs(target)


def _oracle_checks(records: dict[str, RunRecord], configs: dict[str, ResolvedConfig]) -> list[CheckResult]:
    checks = []
    eikonal = configs["eikonal"].config
    grid = eikonal.grid()
    seed = eikonal.sweep.seeds[0]
    speed = field_function(eikonal.hamiltonian_spec().build(grid, seed).field)
    target = eikonal_hbar(speed, eikonal.sweep.p[0], period=grid.extent)
    cbar = records["eikonal"].metrics["cbar"]
    error = _relative(cbar, target)
    checks.append(
        CheckResult("eikonal-oracle", error <= ORACLE_TOLERANCE, f"cbar={cbar:.6g} oracle={target:.6g} rel={error:.3%}")
    )

    quadratic = configs["quadratic"].config
    grid = quadratic.grid()
    potential = field_function(quadratic.hamiltonian_spec().build(grid, quadratic.sweep.seeds[0]).field)
    target = quadratic_potential_hbar(potential, quadratic.sweep.p[0], period=grid.extent)
    cbar = records["quadratic"].metrics["cbar"]
    error = _relative(cbar, target)
    checks.append(
        CheckResult("quadratic-oracle", error <= ORACLE_TOLERANCE, f"cbar={cbar:.6g} oracle={target:.6g} rel={error:.3%}")
    )
    return checks


def _radial_checks(records: dict[str, RunRecord], configs: dict[str, ResolvedConfig]) -> list[CheckResult]:
    metrics = records["radial"].metrics
    witness = metrics.get("witness")
    corrector = records["corrector"].metrics
    return [
        CheckResult("directional-spread", bool(metrics["spread_passed"]), f"spread={metrics['spread']:.3%}"),
        CheckResult("ratio-monotone", bool(metrics["monotone_passed"]), f"witness={witness}" if witness else "ok"),
        CheckResult(
            "linear-fit",
            bool(metrics["fit_passed"]),
            f"slope={metrics['slope']:.6g} residual={metrics['fit_residual']:.3%}",
        ),
        CheckResult(
            "mean-zero",
            corrector["mean_zero_status"] == "pass",
            f"status={corrector['mean_zero_status']} drift_mean={corrector['drift_mean']}",
        ),
    ]


def _convex_checks(records: dict[str, RunRecord], configs: dict[str, ResolvedConfig]) -> list[CheckResult]:
    metrics = records["variance"].metrics
    dispersion = metrics["dispersion"]
    return [
        CheckResult("dispersion-decays", dispersion[-1] < dispersion[0], f"dispersion={dispersion}"),
        CheckResult("dispersion-monotone", bool(metrics["monotone"]), f"dispersion={dispersion}"),
        CheckResult("dispersion-final", bool(metrics["final_ok"]), f"final={dispersion[-1]:.4g}"),
    ]


def _assumption_checks(records: dict[str, RunRecord], configs: dict[str, ResolvedConfig]) -> list[CheckResult]:
    bounds = records["solve"].metrics["assumption_bound"]
    spread = (max(bounds) - min(bounds)) / max(bounds)
    checks = [CheckResult("bound-uniform-in-delta", spread <= ASSUMPTION_SPREAD, f"bounds={bounds} spread={spread:.3%}")]
    if records["solve"].passed is not None:
        checks.append(CheckResult("bound-below-C_R", bool(records["solve"].passed), f"C_R={configs['solve'].config.sweep.C_R}"))
    return checks


def comparison_violation(resolved: ResolvedConfig, scale: float = 1.0, pairs: int = COMPARISON_PAIRS) -> dict[str, Any] | None:
    """One pseudo-step on random ordered pairs; returns the worst order violation, if any."""
    cfg = resolved.config
    grid = cfg.grid()
    params = cfg.scheme()
    if scale != 1.0:
        params = replace(params, dissipation_scale=params.dissipation_scale * scale)
    H = cfg.hamiltonian_spec().build(grid)
    A = cfg.diffusion_spec().build(grid)
    delta = cfg.sweep.deltas[0]
    momentum = np.asarray(cfg.sweep.p, dtype=float)
    scheme = build_discounted_scheme(H, A, momentum, delta, grid, params)
    rng = np.random.default_rng(cfg.environment.seed)
    worst = None
    for pair in range(pairs):
        lower = rng.uniform(-1.0, 1.0, size=grid.shape)
        gap = rng.uniform(0.0, 1.0, size=grid.shape) * (rng.random(grid.shape) < 0.5)
        upper = lower + gap
        difference = scheme.step(upper, delta, momentum) - scheme.step(lower, delta, momentum)
        index = int(np.argmin(difference))
        amount = float(difference.reshape(-1)[index])
        if amount < -COMPARISON_ROUNDING and (worst is None or amount < worst["difference"]):
            worst = {
                "pair": pair,
                "index": list(np.unravel_index(index, grid.shape)),
                "difference": amount,
                "sigma": scheme.sigma,
            }
    return worst


def _comparison_suite(configs: dict[str, ResolvedConfig]) -> list[CheckResult]:
    checks = []
    for name, resolved in configs.items():
        witness = comparison_violation(resolved)
        label = "order-preserved" if name == "comparison" else f"order-preserved-{name}"
        checks.append(
            CheckResult(
                label,
                witness is None,
                "no violation in {} pairs".format(COMPARISON_PAIRS) if witness is None else f"witness={witness}",
            )
        )
    control = comparison_violation(configs["comparison"], scale=0.5)
    checks.append(
        CheckResult(
            "negative-control-detected",
            control is not None,
            f"halved dissipation witness={control}" if control else "halved dissipation produced no violation",
        )
    )
    return checks


_SUITE_CHECKS: dict[str, Callable[[dict[str, RunRecord], dict[str, ResolvedConfig]], list[CheckResult]]] = {
    "oracle-1d": _oracle_checks,
    "radial-2d": _radial_checks,
    "convex-variance": _convex_checks,
    "assumption-H": _assumption_checks,
}


def suite_configs(suite: str, overrides: Sequence[str] = ()) -> dict[str, ResolvedConfig]:
    if suite not in SUITE_CONFIGS:
        raise ParameterError(f"unknown suite; expected one of {', '.join(SUITES)}", key="suite")
    resolved = {}
    for name, payload in SUITE_CONFIGS[suite].items():
        data = copy.deepcopy(payload)
        data.setdefault("output", {})["directory"] = f"runs/verify/{suite}"
        resolved[name] = resolve_config(data, overrides)
    return resolved


def verify(
    suite: str,
    overrides: Sequence[str] = (),
    *,
    workers: int = 1,
    output: Path | str | None = None,
) -> VerifyResult:
    """Run an acceptance suite with its built-in config and write report.csv plus a manifest."""
    configs = suite_configs(suite, overrides)
    first = next(iter(configs.values())).config
    root = Path(output) if output is not None else Path(first.output.directory)
    result = VerifyResult(suite=suite, output_dir=root)
    logger.info("verify %s into %s", suite, root)
    if suite == "comparison":
        result.checks = _comparison_suite(configs)
    else:
        records = {
            name: run_config(resolved, workers=workers, output=root / name) for name, resolved in configs.items()
        }
        result.checks = _SUITE_CHECKS[suite](records, configs)
    store = ArtifactStore(root)
    if suite != "comparison":
        for name in configs:
            store.register(f"{name}/manifest.txt")
    report = pd.DataFrame(
        [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in result.checks],
        columns=["check", "passed", "detail"],
    )
    store.write_table("report.csv", report)
    store.write_manifest()
    for check in result.checks:
        logger.info("%s %s: %s", "PASS" if check.passed else "FAIL", check.name, check.detail)
    return result
