"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain where a quantity is defined (divergent moments, bad shapes, ...)."""


class DegenerateError(DomainError):
    """A closed-form optimum does not exist for the given inputs (e.g. a vanishing denominator)."""


class NumericError(ArithmeticError):
    """A numerical routine missed its accuracy target.

    ``achieved`` carries the best error estimate that was reached.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConvergenceError(NumericError):
    """An iterative optimizer ran out of budget; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, achieved=None):
        super().__init__(message, achieved=achieved)
        self.best = best


class TailSampleWarning(UserWarning):
    """Fewer than the recommended number of tail samples for an MC risk estimate."""
