"""Exception types shared across the package."""


class QDarwinError(Exception):
    """Base class for all errors raised by qdarwin."""


class InvalidInputError(QDarwinError, ValueError):
    """An argument violates a documented precondition."""


class GuardError(InvalidInputError):
    """A desk-scale size guard was exceeded (dimension or subsystem count)."""


class NumericalError(QDarwinError, ArithmeticError):
    """A numerical invariant failed beyond tolerance."""


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap before converging."""
