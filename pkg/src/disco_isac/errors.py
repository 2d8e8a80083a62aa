"""Exception hierarchy shared by the library and the CLI."""


class DiscoIsacError(Exception):
    """Base class for all library errors."""


class DomainError(DiscoIsacError, ValueError):
    """An input lies outside the domain of an operation."""


class ConfigError(DiscoIsacError, ValueError):
    """A scenario configuration is invalid.

    ``line`` carries the 1-based line number in the source file when known.
    """

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class InfeasibleError(DiscoIsacError, ValueError):
    """A constraint set admits no solution (e.g. frame shorter than the array)."""


class NumericalError(DiscoIsacError, ArithmeticError):
    """An iterative routine failed to converge or hit a singular system."""


class UnidentifiableError(NumericalError):
    """The Fisher information matrix is singular or indefinite."""
