"""Exception hierarchy."""


class FinslerLabError(Exception):
    """Base class for all errors raised by finslerlab."""


class DSLSyntaxError(FinslerLabError, ValueError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(f"{message}{where}")


class UnknownIdentifier(FinslerLabError, ValueError):
    pass


class DimensionMismatch(UnknownIdentifier):
    """A variable index exceeds the declared dimension."""


class DomainViolation(FinslerLabError, ArithmeticError):
    """Evaluation left the domain of an operation (sqrt < 0, x/0, ...)."""

    def __init__(self, message, subexpr=None):
        self.subexpr = subexpr
        super().__init__(message)


class NonFiniteResult(FinslerLabError, ArithmeticError):
    def __init__(self, message, subexpr=None):
        self.subexpr = subexpr
        super().__init__(message)


class DegenerateMetric(FinslerLabError):
    pass


class NoSamplesError(FinslerLabError):
    pass


class IncompatibleKind(FinslerLabError, ValueError):
    """A vector field cannot be checked against the requested condition."""
