"""Exception hierarchy shared by every module of the toolkit."""


class SmoError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpace(SmoError, ValueError):
    pass


class LengthMismatch(SmoError, ValueError):
    pass


class InvalidFitness(SmoError, ValueError):
    pass


class NonFiniteObjective(SmoError, ValueError):
    pass


class ObjectiveFailure(SmoError, RuntimeError):
    """Raised when an objective raises or returns a non-finite value.

    ``log`` holds the partial run log recorded up to the failure, when the
    failure happened inside a full optimization run.
    """

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class InvalidParams(SmoError, ValueError):
    pass


class ShapeMismatch(SmoError, ValueError):
    pass


class InvalidEpsilon(SmoError, ValueError):
    pass


class EmptyMask(SmoError, ValueError):
    pass


class EmptyDataset(SmoError, ValueError):
    pass


class InvalidInput(SmoError, ValueError):
    pass


class DecodeError(SmoError, OSError):
    pass


class ConfigError(SmoError, ValueError):
    pass


class MissingPair(SmoError, FileNotFoundError):
    pass
