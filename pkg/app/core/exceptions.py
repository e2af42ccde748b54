# app/core/exceptions.py

"""
Domain Exceptions
-----------------

Every failure the simulator can report is a subclass of ``SimulationError``.
Each class carries the process exit code used by the CLI:

- 1 for validation failures (a model, schedule, problem or config is rejected)
- 2 for runtime errors (a computation could not be completed)
"""

from typing import Optional, Sequence


VALIDATION_EXIT_CODE = 1
RUNTIME_EXIT_CODE = 2


class SimulationError(Exception):
    """
    Base class for simulator errors.

    :param detail: Human readable diagnostic.
    :type detail: str
    """

    exit_code: int = RUNTIME_EXIT_CODE

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class ValidationFailure(SimulationError):
    """A user-supplied component violates a standing assumption."""

    exit_code = VALIDATION_EXIT_CODE


# ----------------------------------------------------------------------
# Validation failures
# ----------------------------------------------------------------------
class NotStochastic(ValidationFailure):
    """Negative entry or row sum different from 1."""


class Reducible(ValidationFailure):
    """Support graph of the gossip matrix is not strongly connected."""


class SpectralViolation(ValidationFailure):
    """Some eigenvalue of Q has magnitude at or above 1."""


class Inadmissible(ValidationFailure):
    """
    Step schedule fails one or more admissibility conditions.

    :param violations: Names of the failed conditions.
    :type violations: Sequence[str]
    """

    def __init__(self, violations: Sequence[str]) -> None:
        self.violations = list(violations)
        super().__init__("inadmissible schedule: " + ", ".join(self.violations))


class NonPositiveMargin(ValidationFailure):
    """Descent margin is not positive on the configured region."""


class DimensionMismatch(ValidationFailure):
    """Array shapes do not agree."""


class ConfigParseError(ValidationFailure):
    """
    Experiment config could not be parsed.

    :param detail: Diagnostic message.
    :type detail: str

    :param line: Line of a JSON syntax error, if any.
    :type line: Optional[int]

    :param field: Dotted path of the offending field, if any.
    :type field: Optional[str]
    """

    def __init__(self, detail: str, line: Optional[int] = None, field: Optional[str] = None) -> None:
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + detail)


# ----------------------------------------------------------------------
# Runtime errors
# ----------------------------------------------------------------------
class NoConvergence(SimulationError):
    """An iterative solve did not reach its tolerance."""


class HorizonExceeded(SimulationError):
    """A quantity needs more steps than the configured horizon provides."""


class NonFinite(SimulationError):
    """
    An iterate or ODE state became NaN or infinite.

    :param detail: Diagnostic message.
    :type detail: str

    :param step: Index of the offending step.
    :type step: Optional[int]
    """

    def __init__(self, detail: str, step: Optional[int] = None) -> None:
        self.step = step
        super().__init__(detail if step is None else f"{detail} at step {step}")


class RegionExit(SimulationError):
    """An ODE trajectory left the configured bounding region."""


class OutOfDomain(SimulationError):
    """Requested time lies outside the recorded trajectory."""


class Divergent(SimulationError):
    """The theorem series does not converge for this schedule."""


class InsufficientConditioning(SimulationError):
    """Too few replicas satisfied the entry event."""
