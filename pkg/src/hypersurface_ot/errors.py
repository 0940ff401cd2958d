"""Exception hierarchy.

Each exception carries an ``exit_code`` used by the command-line front end:
2 for bad input, 3 for degenerate mathematics, 4 for non-convergence.
"""


class HypersurfaceOTError(Exception):
    exit_code = 1


class InvalidPolynomial(HypersurfaceOTError, ValueError):
    exit_code = 2


class DimensionMismatch(HypersurfaceOTError, ValueError):
    exit_code = 2


class InvalidMeasure(HypersurfaceOTError, ValueError):
    exit_code = 2


class InvalidTransform(HypersurfaceOTError, ValueError):
    exit_code = 2


class SizeMismatch(HypersurfaceOTError, ValueError):
    exit_code = 2


class AmbiguousGeodesic(HypersurfaceOTError):
    exit_code = 3


class DegenerateSampling(HypersurfaceOTError):
    exit_code = 3


class DegenerateRootSet(HypersurfaceOTError):
    exit_code = 3


class NearDiscriminant(HypersurfaceOTError):
    """A quadrature node has a (numerically) vanishing complex gradient."""

    exit_code = 3

    def __init__(self, message, node=None, time_index=None):
        super().__init__(message)
        self.node = node
        self.time_index = time_index


class EndpointOnDiscriminant(HypersurfaceOTError):
    exit_code = 3


class InfiniteCondition(HypersurfaceOTError):
    exit_code = 3

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


class TrackingLost(HypersurfaceOTError):
    exit_code = 4

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


class RootFindingFailed(HypersurfaceOTError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StuckNearDiscriminant(HypersurfaceOTError):
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
