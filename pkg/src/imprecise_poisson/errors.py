"""Exception types shared across the package."""


class ImprecisePoissonError(Exception):
    """Base class for all package errors."""


class ValidationError(ImprecisePoissonError, ValueError):
    """An input violates a documented invariant or precondition."""


class HorizonError(ValidationError):
    """A time point lies outside the horizon of a path."""


class InvalidPolicyError(ValidationError):
    """A rate policy returned a rate outside the rate interval."""


class StrategyError(ValidationError):
    """A trading strategy is malformed on some path."""


class BudgetError(ImprecisePoissonError, RuntimeError):
    """A numerical error budget or step ceiling cannot be met."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
