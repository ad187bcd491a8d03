"""
Exception hierarchy for the multivirus_defense package.

Validation errors also derive from ``ValueError`` so that callers which only
care about bad input can catch them generically.
"""

from typing import Optional


class MitigationError(Exception):
    """Base class for every error raised by this package."""


class IndexOutOfRange(MitigationError, ValueError):
    """A host index lies outside ``[0, n)``."""


class SelfLoop(MitigationError, ValueError):
    """An edge connects a host to itself."""


class InvalidProbability(MitigationError, ValueError):
    """A probability lies outside ``[0, 1]``."""


class AlreadyInfected(MitigationError, ValueError):
    """An infection target was computed for a virus already in the set."""


class TooManyViruses(MitigationError, ValueError):
    """The virus count exceeds the supported enumeration limit."""


class NotSymmetric(MitigationError, ValueError):
    """A matrix passed to a symmetric routine is not symmetric."""


class DomainError(MitigationError, ValueError):
    """A closed-form bound was evaluated outside its domain."""


class MultiVirusUnsupported(MitigationError, ValueError):
    """A single-virus law was used with a multi-virus model."""


class StepTooLarge(MitigationError):
    """An integration step left the admissible box; halve the step."""


class Extinct(MitigationError):
    """No event is enabled: the chain has reached an absorbing state."""


class StateSpaceTooLarge(MitigationError):
    """The exact joint chain is too large to enumerate."""


class NotConverged(MitigationError):
    """An iterative routine stopped at its iteration cap."""


class SingularLyapunov(MitigationError):
    """The Lyapunov operator is singular (spectrum touches the imaginary axis)."""


class ConfigError(MitigationError, ValueError):
    """
    A scenario, model or network file could not be parsed.

    Attributes:
        field: Dotted path of the offending field (or None)
        line: 1-based line number in the source text (or None)
    """

    def __init__(
        self, message: str, field: Optional[str] = None, line: Optional[int] = None
    ):
        self.field = field
        self.line = line
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
