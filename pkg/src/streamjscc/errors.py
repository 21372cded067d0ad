"""Exception types shared across the package."""


class StreamJsccError(Exception):
    """Base class for all package errors."""


class EmptyMatrix(StreamJsccError):
    pass


class NonStochastic(StreamJsccError):
    pass


class NoConvergence(StreamJsccError):
    pass


class DimensionMismatch(StreamJsccError):
    pass


class IndexOutOfRange(StreamJsccError):
    pass


class NonStationaryMarkov(StreamJsccError):
    pass


class DegenerateChannel(StreamJsccError):
    pass


class NotDegenerate(StreamJsccError):
    pass


class LengthOverflow(StreamJsccError):
    pass


class IncompletePartition(StreamJsccError):
    pass


class ZeroEvidence(StreamJsccError):
    pass


class NotBinary(StreamJsccError):
    pass


class MassImbalance(StreamJsccError):
    pass


class HorizonExceeded(StreamJsccError):
    pass


class RequestBeforeArrival(StreamJsccError):
    pass


class SearchSpaceTooLarge(StreamJsccError):
    pass


class InsufficientSamples(StreamJsccError):
    pass


class InsufficientErrorEvents(StreamJsccError):
    pass


class IoFailure(StreamJsccError):
    pass
