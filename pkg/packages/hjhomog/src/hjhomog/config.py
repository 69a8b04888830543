from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from hjhomog.environment import MAX_SEED, EnvironmentSpec
from hjhomog.errors import ConfigError
from hjhomog.grid import GridSpec
from hjhomog.models import DiffusionSpec, HamiltonianSpec
from hjhomog.solver import SchemeParams

EXPERIMENTS = (
    "env-sample",
    "solve",
    "homog",
    "corrector",
    "geometry",
    "verify-radial",
    "verify-convex",
    "oscillatory",
)

ExperimentName = Literal[
    "env-sample",
    "solve",
    "homog",
    "corrector",
    "geometry",
    "verify-radial",
    "verify-convex",
    "oscillatory",
]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvironmentBlock(_Block):
    family: Literal["RandomPhaseTrig", "PoissonBumps", "RandomCheckerboard"] = "RandomPhaseTrig"
    params: dict[str, Any] = Field(default_factory=dict)
    isotropize: bool = False
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    def spec(self) -> EnvironmentSpec:
        return EnvironmentSpec(
            family=self.family,
            params=dict(self.params),
            seed=self.seed,
            isotropize=self.isotropize,
        )


class HamiltonianBlock(_Block):
    family: Literal["Eikonal", "QuadraticPotential", "DoubleWell"] = "Eikonal"


class DiffusionBlock(_Block):
    family: Literal["Zero", "Isotropic", "CurvatureProjection"] = "Zero"
    nu: float = Field(default=0.0, ge=0.0)
    nu_min: float = Field(default=0.0, ge=0.0)
    # Coefficient field nu(x) = max(nu_min, nu * field(x)); constant nu when absent.
    environment: EnvironmentBlock | None = None


class NumericsBlock(_Block):
    dim: Literal[1, 2] = 1
    extent: float = Field(default=8.0, gt=0.0)
    spacing: float = Field(default=1.0 / 256, gt=0.0)
    lf_dissipation: float | None = Field(default=None, ge=0.0)
    pseudo_time_step: float | None = Field(default=None, gt=0.0)
    cfl: float = Field(default=0.9, gt=0.0, le=1.0)
    dissipation_scale: float = Field(default=1.0, gt=0.0)
    stop_tol: float = Field(default=1e-9, gt=0.0)
    max_iters: int = Field(default=10_000_000, ge=1)
    gradient_epsilon: float = Field(default=1e-8, gt=0.0)
    diagnostics_every: int = Field(default=10_000, ge=1)


class SweepBlock(_Block):
    p: list[float] = Field(default_factory=lambda: [1.0])
    p_grid: list[list[float]] = Field(default_factory=list)
    deltas: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    seeds: list[int] = Field(default_factory=lambda: [0])
    points: list[list[float]] = Field(default_factory=list)
    directions: int = Field(default=8, ge=1)
    radii: list[float] = Field(default_factory=lambda: [0.5, 1.0, 1.5])
    C_R: float | None = None
    threshold: float = Field(default=0.05, ge=0.0)
    min_seeds: int = Field(default=8, ge=2)


class OscillatoryBlock(_Block):
    epsilons: list[float] = Field(default_factory=lambda: [0.25, 0.125])
    horizon: float = Field(default=0.25, gt=0.0)
    extent: float = Field(default=1.0, gt=0.0)
    spacing: float = Field(default=1.0 / 128, gt=0.0)
    hbar_range: float = Field(default=2.0, gt=0.0)
    hbar_nodes: int = Field(default=9, ge=2)


class OutputBlock(_Block):
    directory: str = "runs/default"
    csv: bool = True
    svg: bool = True


class ExperimentConfig(_Block):
    experiment: ExperimentName
    environment: EnvironmentBlock = Field(default_factory=EnvironmentBlock)
    hamiltonian: HamiltonianBlock = Field(default_factory=HamiltonianBlock)
    diffusion: DiffusionBlock = Field(default_factory=DiffusionBlock)
    numerics: NumericsBlock = Field(default_factory=NumericsBlock)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    oscillatory: OscillatoryBlock = Field(default_factory=OscillatoryBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    def grid(self) -> GridSpec:
        return GridSpec(dim=self.numerics.dim, extent=self.numerics.extent, spacing=self.numerics.spacing)

    def scheme(self) -> SchemeParams:
        n = self.numerics
        return SchemeParams(
            lf_dissipation=n.lf_dissipation,
            pseudo_time_step=n.pseudo_time_step,
            cfl=n.cfl,
            dissipation_scale=n.dissipation_scale,
            stop_tol=n.stop_tol,
            max_iters=n.max_iters,
            gradient_epsilon=n.gradient_epsilon,
            diagnostics_every=n.diagnostics_every,
        )

    def hamiltonian_spec(self) -> HamiltonianSpec:
        return HamiltonianSpec(family=self.hamiltonian.family, environment=self.environment.spec())

    def diffusion_spec(self) -> DiffusionSpec:
        block = self.diffusion
        return DiffusionSpec(
            family=block.family,
            nu=block.nu,
            nu_min=block.nu_min,
            environment=block.environment.spec() if block.environment is not None else None,
        )


@dataclass(frozen=True)
class ResolvedConfig:
    config: ExperimentConfig
    sources: dict[str, str]
    path: Path | None = None

    def resolved_payload(self) -> dict[str, Any]:
        return self.config.model_dump(mode="json")


def parse_override(item: str) -> tuple[list[str], Any]:
    """'a.b=value' -> (['a', 'b'], value); value is JSON when it parses, else a plain string."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} must look like key=value", key=key or None)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply(data: dict[str, Any], path: list[str], value: Any) -> None:
    node = data
    for part in path[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError("cannot set a key below a non-object value", key=".".join(path))
        node = child
    node[path[-1]] = value


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.search(line):
            return number
    return None


def _leaves(payload: Any, prefix: str = "") -> list[str]:
    if isinstance(payload, dict) and payload:
        keys: list[str] = []
        for name, value in payload.items():
            keys.extend(_leaves(value, f"{prefix}.{name}" if prefix else name))
        return keys
    return [prefix]


def _present(data: Any, dotted: str) -> bool:
    node = data
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return False
        node = node[part]
    return True


def resolve_config(
    data: dict[str, Any],
    overrides: Sequence[str] = (),
    *,
    text: str = "",
    path: Path | None = None,
) -> ResolvedConfig:
    merged = json.loads(json.dumps(data))
    override_keys = []
    for item in overrides:
        parts, value = parse_override(item)
        _apply(merged, parts, value)
        override_keys.append(".".join(parts))
    try:
        config = ExperimentConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        dotted = ".".join(str(part) for part in first["loc"])
        leaf = next((str(part) for part in reversed(first["loc"]) if isinstance(part, str)), "")
        from_override = any(dotted == key or dotted.startswith(key + ".") for key in override_keys)
        line = None if from_override or not leaf else _line_of(text, leaf)
        raise ConfigError(first["msg"], key=dotted or None, line=line) from exc

    sources = {}
    for dotted in _leaves(config.model_dump(mode="json")):
        if any(dotted == key or dotted.startswith(key + ".") for key in override_keys):
            sources[dotted] = "override"
        elif _present(data, dotted):
            sources[dotted] = "file"
        else:
            sources[dotted] = "default"
    return ResolvedConfig(config=config, sources=sources, path=path)


def load_config(path: Path | str, overrides: Sequence[str] = ()) -> ResolvedConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", line=1)
    return resolve_config(data, overrides, text=text, path=path)
