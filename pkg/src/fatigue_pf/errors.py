"""Exceptions raised by the solvers and parsers."""


class FatigueError(Exception):
    """Base class for all package errors."""


class InputError(FatigueError):
    """Malformed configuration, mesh or trace file."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class SolverError(FatigueError):
    """A nonlinear or constrained solve failed to converge."""

    def __init__(self, message: str, residual: float | None = None, step: int | None = None):
        self.residual = residual
        self.step = step
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class LoadCapacityError(SolverError):
    """A force-controlled target exceeds what the degraded material can carry.

    ``trace`` holds everything computed up to the failing step.
    """

    def __init__(self, message: str, step: int | None = None, trace=None):
        self.trace = trace
        super().__init__(message, step=step)


class EnergyBalanceError(SolverError):
    """The discrete power balance was violated at an accepted step."""
