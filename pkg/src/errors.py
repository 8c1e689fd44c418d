"""Exception hierarchy for twochan."""

from typing import Any, Optional


class TwoChannelError(Exception):
    """Base class for all errors raised by twochan."""


class ConfigError(TwoChannelError):
    """Invalid model or runtime configuration."""


class DimensionError(TwoChannelError):
    """Matrix or vector dimensions do not agree with the model."""


class SingularInnovationError(TwoChannelError):
    """An innovation covariance block is numerically singular."""

    def __init__(self, block: str, condition: float):
        self.block = block
        self.condition = condition
        super().__init__(
            f"innovation covariance for block '{block}' is singular "
            f"(condition number {condition:.3e})"
        )


class CovarianceError(TwoChannelError):
    """A covariance matrix lost symmetry or positive semidefiniteness."""


class PolytopeError(TwoChannelError):
    """The Jacobian polytope cannot be built for the given envelope."""


class SolverFailureError(TwoChannelError):
    """The conic backend failed numerically (distinct from infeasibility)."""

    def __init__(self, message: str, solution: Optional[Any] = None):
        self.solution = solution
        super().__init__(message)


class NoFeasibleRateError(TwoChannelError):
    """Every candidate rate pair was excluded by the scheduler."""

    def __init__(self, statuses: list[tuple[float, float, str]]):
        self.statuses = statuses
        lines = ", ".join(f"({l1:g}, {l2:g}): {st}" for l1, l2, st in statuses)
        super().__init__(f"no admissible rate pair among candidates: {lines}")


class LogFormatError(TwoChannelError):
    """A measurement log row is malformed."""

    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class SimulationError(TwoChannelError):
    """The filter failed numerically during a run."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step}: {cause}")
