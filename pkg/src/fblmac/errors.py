"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class UnstableError(DomainError):
    """A queue has no stationary distribution for the given rates."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite value."""
