"""
Exception hierarchy for the trajectory-grid simulator.

Value problems subclass ValueError and arithmetic problems subclass
ArithmeticError, so callers that only know builtins still catch them.
"""

from typing import List, Optional, Sequence


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class NodeEvaluationError(SimulationError, ValueError):
    """The wave function is (numerically) zero where a value was required."""

    def __init__(self, message: str, index: Optional[int] = None, density: Optional[float] = None):
        super().__init__(message)
        self.index = index
        self.density = density


class FitError(SimulationError):
    """Base class for local polynomial fitting failures."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DegenerateStencilError(FitError, ValueError):
    """Two abscissae of one stencil coincide."""


class InvalidInputError(FitError, ValueError):
    """Non-finite or malformed fitting input."""


class IllConditionedError(FitError, ArithmeticError):
    """The fitting system is singular beyond tolerance."""

    def __init__(self, message: str, condition: float, index: Optional[int] = None):
        super().__init__(message, index=index)
        self.condition = condition


class GridTooSmallError(FitError, ValueError):
    """The grid cannot host the requested stencil."""


class NumericalBlowupError(SimulationError, ArithmeticError):
    """An updated quantity became non-finite or exceeded the magnitude bound."""

    def __init__(self, message: str, index: Optional[int] = None, quantity: str = ""):
        super().__init__(message)
        self.index = index
        self.quantity = quantity


class StepError(SimulationError):
    """A time step failed; records which phase and grid index."""

    def __init__(
        self,
        message: str,
        phase: str,
        index: Optional[int] = None,
        positions: Optional[Sequence[float]] = None,
        cause: Optional[Exception] = None,
    ):
        super().__init__(message)
        self.phase = phase
        self.index = index
        self.positions = positions
        self.cause = cause


class NodeEncounteredError(SimulationError, ValueError):
    """Quantile marching walked into a node of the initial density."""

    def __init__(self, message: str, position: float):
        super().__init__(message)
        self.position = position


class InitFailureError(SimulationError, RuntimeError):
    """Initial grid construction did not converge."""


class ConfigError(SimulationError, ValueError):
    """Malformed or invalid run configuration."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.field = field


class MissingSnapshotError(SimulationError, KeyError):
    """A requested time is not among the recorded snapshots."""

    def __init__(self, requested: float, available: List[float]):
        listed = ", ".join(f"{t:g}" for t in available)
        super().__init__(f"No snapshot at t={requested:g}; available times: {listed}")
        self.requested = requested
        self.available = available

    def __str__(self) -> str:
        return self.args[0]
