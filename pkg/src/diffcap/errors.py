"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """An argument violates an operation's precondition."""


class InvalidOrderError(InvalidParameterError):
    """The differentiation order is not a positive non-integer real."""


class EvaluationError(ArithmeticError):
    """User-supplied data produced a non-finite value during stepping."""


class OracleError(RuntimeError):
    """An adaptive reference integration could not meet its error target."""


class UnsupportedOperationError(RuntimeError):
    """The problem does not carry the data an operation needs."""


class InsufficientDataError(ValueError):
    """Too few usable points remain for a fit."""
