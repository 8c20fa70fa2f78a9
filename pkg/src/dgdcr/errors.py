"""Exception types raised across the package."""


class DgError(Exception):
    """Base class for all solver errors."""


class InvalidTopology(DgError):
    pass


class InvalidBoundarySpec(DgError):
    pass


class NonManifold(DgError):
    pass


class DegenerateElement(DgError):
    pass


class UnsupportedDegree(DgError):
    pass


class InvalidIndex(DgError):
    pass


class DimensionMismatch(DgError):
    pass


class SingularMatrix(DgError):
    """Raised when a direct solve hits a (numerically) zero pivot."""

    def __init__(self, message, pivot=None, iteration=None):
        super().__init__(message)
        self.pivot = pivot
        self.iteration = iteration


class UnknownMethod(DgError):
    pass


class InflowOnNeumann(DgError):
    pass


class UnknownProblem(DgError):
    pass


class NoExactSolution(DgError):
    pass


class InvalidCoefficient(DgError):
    pass
