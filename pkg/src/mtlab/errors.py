"""Exception and warning types shared across the package."""


class NumericalFailure(RuntimeError):
    """Base class for failures that the CLI maps to exit status 3."""


class SaturationError(NumericalFailure):
    """An exponent exceeded the cap where saturation is not allowed."""


class ConstraintError(ValueError):
    """A profile lies outside the unit Sobolev ball beyond tolerance."""


class ShootingError(NumericalFailure):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class MatchingError(NumericalFailure):
    def __init__(self, message, defects=None):
        super().__init__(message)
        self.defects = defects


class StepSizeError(NumericalFailure):
    """One-sided difference quotients disagree beyond tolerance."""


class SaturationWarning(RuntimeWarning):
    pass


class WindowClipWarning(RuntimeWarning):
    pass


class TailWarning(RuntimeWarning):
    pass


class SensitivityWarning(RuntimeWarning):
    pass
