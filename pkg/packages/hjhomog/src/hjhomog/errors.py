from __future__ import annotations

from typing import Sequence


class HJHomogError(Exception):
    """Base class for every error raised by hjhomog."""


class ParameterError(HJHomogError, ValueError):
    def __init__(self, message: str, key: str | None = None) -> None:
        prefix = f"{key}: " if key else ""
        super().__init__(f"{prefix}{message}")
        self.key = key


class ConfigError(ParameterError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None) -> None:
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{suffix}", key=key)
        self.line = line


class DomainError(HJHomogError, ValueError):
    pass


class ExtrapolationError(HJHomogError, ValueError):
    pass


class GeometryError(HJHomogError, ValueError):
    pass


class NotApplicableError(HJHomogError, ValueError):
    pass


class NonconvergenceError(HJHomogError, RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        iterations: int,
        residual_history: Sequence[tuple[int, float]] = (),
        seed: int | None = None,
        delta: float | None = None,
    ) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual_history = list(residual_history)
        self.seed = seed
        self.delta = delta

    def annotate(self, *, seed: int | None = None, delta: float | None = None) -> "NonconvergenceError":
        where = ", ".join(
            part
            for part in (
                f"seed={seed}" if seed is not None else "",
                f"delta={delta:g}" if delta is not None else "",
            )
            if part
        )
        annotated = NonconvergenceError(
            f"{self.args[0]} [{where}]" if where else str(self.args[0]),
            iterations=self.iterations,
            residual_history=self.residual_history,
            seed=seed if seed is not None else self.seed,
            delta=delta if delta is not None else self.delta,
        )
        return annotated


class StageError(HJHomogError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
