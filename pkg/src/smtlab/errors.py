"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter lies outside its admissible domain."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent with the problem size."""


class NumericalDivergenceError(RuntimeError):
    """A time stepper produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InstabilityError(RuntimeError):
    """A grid solver violated its consistency bound; a smaller step is needed."""

    def __init__(self, message, suggested_h=None):
        super().__init__(message)
        self.suggested_h = suggested_h


class InsufficientDataError(RuntimeError):
    """Not enough usable samples to carry out a fit or extrapolation."""
