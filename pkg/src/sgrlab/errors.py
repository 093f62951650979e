"""Exception types shared across the package."""


class SgrLabError(Exception):
    """Base class for all sgrlab errors."""


class ValidationError(SgrLabError):
    """Invalid input: malformed model, bad parameter, broken precondition."""


class UnsupportedModelError(ValidationError):
    """The requested computation is not defined for this kind of model."""


class NumericalError(SgrLabError):
    """An iterative computation failed to converge or degenerated."""
