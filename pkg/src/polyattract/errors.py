class DomainError(ValueError):
    """Argument outside the domain where a formula or operation is defined."""


class NumericalError(ArithmeticError):
    """Non-finite values or a solver that failed to converge."""
