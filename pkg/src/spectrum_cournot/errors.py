"""Exception types raised across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid market configuration (sizes, bandwidth)."""


class FeasibilityError(ValueError):
    """An allocation violates one of the coverage constraints (1), (2) or (3).

    Attributes:
        constraint: number of the violated constraint: 1 for A\\B, 2 for AB,
            3 for B\\A.
    """

    def __init__(self, constraint: int, message: str):
        super().__init__(f"constraint ({constraint}) violated: {message}")
        self.constraint = constraint


class NotApplicableError(ValueError):
    """The requested computation does not apply to the given input."""


class SolverError(RuntimeError):
    """Best-response iteration failed to converge to a verified equilibrium."""

    def __init__(self, message: str, last_iterate=None, residual: float = float("nan")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ScenarioError(ValueError):
    """Malformed or invalid scenario file."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
