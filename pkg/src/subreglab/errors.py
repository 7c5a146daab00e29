"""Exception types raised across the lab."""


class SubregLabError(Exception):
    """Base class for all lab errors."""


class ParseError(SubregLabError):
    """Malformed function DSL input.

    Carries 1-based ``line`` and ``column`` of the offending token when known.
    """

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column})"
        super().__init__(f"{message}{loc}")


class DomainError(SubregLabError):
    """Expression undefined at a point (NaN), or point outside the box."""

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class UnsupportedStructure(SubregLabError):
    """Input lacks the structure an exact oracle requires."""


class BudgetExceeded(SubregLabError):
    """A grid or lattice would exceed the configured size cap."""


class PreconditionError(SubregLabError):
    """A checked precondition failed; ``witness`` is the offending point."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ArgumentError(SubregLabError, ValueError):
    """Invalid argument value."""
