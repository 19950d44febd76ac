"""Exception types raised by adaptive-rom."""


class RomError(Exception):
    """Base class for all adaptive-rom errors."""


class InvalidInputError(RomError, ValueError):
    """Arguments violate a documented precondition."""


class ConfigError(RomError, ValueError):
    """Experiment configuration is invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericFailureError(RomError, ArithmeticError):
    """A numerical kernel produced non-finite values or failed to factor."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class PivotBreakdownError(NumericFailureError):
    """Incomplete factorization hit a zero pivot."""


class InterpolationDegeneracyError(NumericFailureError):
    """The interpolation matrix P^T U_f is singular."""


class RomInstabilityError(NumericFailureError):
    """A reduced trajectory became non-finite or diverged."""


class DegenerateRhoError(NumericFailureError):
    """Every snapshot instant was skipped when averaging the residual ratio."""
