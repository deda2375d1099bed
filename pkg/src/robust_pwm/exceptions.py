"""Exception types raised across the package."""


class RobustPWMError(ValueError):
    """Base class for domain errors."""


class NonIdentifiable(RobustPWMError):
    """The PWM ratio defining the tail index is not a positive number.

    ``theta_hats`` and ``ratio`` carry the offending estimates so callers can
    record them instead of dropping the replication.
    """

    def __init__(self, message, theta_hats=None, ratio=None):
        super().__init__(message)
        self.theta_hats = theta_hats
        self.ratio = ratio


class InsufficientSample(RobustPWMError):
    """Too few observations for the requested estimator."""


class InvalidFit(RobustPWMError):
    """A fitted GEV would have no finite mean (shape >= 1)."""


class DataError(RobustPWMError):
    """Malformed input data; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
