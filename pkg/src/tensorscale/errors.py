"""Exception hierarchy shared by the tensor, engine, oracle and CLI layers."""


class TensorScaleError(Exception):
    """Base class for every error raised by tensorscale."""


class InvalidRankError(TensorScaleError, ValueError):
    pass


class InvalidIndexError(TensorScaleError, ValueError):
    pass


class InvalidScalingError(TensorScaleError, ValueError):
    pass


class MalformedTensorError(TensorScaleError, ValueError):
    pass


class InvalidTargetError(TensorScaleError, ValueError):
    pass


class InfeasibleEmptySubtensorError(TensorScaleError, ValueError):
    """A subtensor with no nonzeros was given a target product other than 1."""


class PatternMismatchError(TensorScaleError, ValueError):
    pass


class OracleTooLargeError(TensorScaleError):
    """The dense incidence system would exceed the configured column limit."""


class TensorFormatError(TensorScaleError, ValueError):
    """A tensor, targets or scalings file could not be parsed."""
