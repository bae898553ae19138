"""Exception types raised by the library."""


class CPQError(Exception):
    """Base class for numerical errors (CLI exit code 2)."""


class DegenerateTriangle(CPQError):
    pass


class VertexCoincidence(CPQError):
    pass


class NoConvergence(CPQError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AmbiguousProjection(CPQError):
    """Two distinct local minima of the distance are equally close.

    ``candidates`` holds the competing reference points so callers can
    decide themselves.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class ToleranceNotReached(CPQError):
    def __init__(self, message, value=None, estimate=None):
        super().__init__(message)
        self.value = value
        self.estimate = estimate


class ReferenceMissing(CPQError):
    pass


class MeshFormatError(CPQError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
