"""Exception types shared across the package."""

import numpy as np


class SntkError(Exception):
    pass


class InvalidInputError(SntkError, ValueError):
    pass


class DomainError(SntkError, ValueError):
    """A bound or generator was asked to evaluate outside its hypothesis."""


class SingularMatrixError(SntkError, np.linalg.LinAlgError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class DivergenceError(SntkError, FloatingPointError):
    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class MissingDataError(SntkError, LookupError):
    pass


class StaleIndexError(SntkError, RuntimeError):
    """The active-set index no longer matches the model it was built for."""


class FormatError(SntkError, ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CapacityError(SntkError, RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(SntkError, ValueError):
    pass
