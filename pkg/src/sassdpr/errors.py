"""Exception hierarchy shared by every module of the package."""


class SassdprError(Exception):
    """Base class for all package errors."""


class ConfigError(SassdprError, ValueError):
    """Invalid user-supplied parameter (order, frequency, shape, ...)."""


class UnstableFilter(ConfigError):
    pass


class DegreeError(ConfigError):
    pass


class OrderError(ConfigError):
    pass


class FrequencyError(ConfigError):
    pass


class WindowError(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class TooShort(ConfigError):
    pass


class ParameterError(ConfigError):
    pass


class EmptyGrid(ConfigError):
    pass


class SingularTransform(SassdprError):
    pass


class SingularLyapunov(SassdprError):
    pass


class NotPositiveDefinite(SassdprError):
    pass


class CompositionMismatch(SassdprError):
    pass


class NotFactorable(SassdprError):
    pass


class NoConvergence(SassdprError):
    """Iteration cap reached before the stopping rule fired.

    The best iterate found so far is attached as ``result`` so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
