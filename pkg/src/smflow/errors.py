"""Exception types raised across the package."""


class SMFlowError(Exception):
    """Base class for all package errors."""


class AntipodalError(SMFlowError, ValueError):
    """Two points are (numerically) antipodal; no unique minimizing geodesic."""


class DegenerateGeodesicError(SMFlowError, ValueError):
    """The geodesic has (numerically) zero length."""


class ConjugatePointError(SMFlowError, ValueError):
    """The Jacobi boundary-value problem is singular (sin L ~ 0)."""


class GridMismatchError(SMFlowError, ValueError):
    pass


class ClosenessError(SMFlowError, ValueError):
    """Two maps are not within the closeness radius at some node."""

    def __init__(self, node, dist, delta0):
        self.node = node
        self.dist = dist
        self.delta0 = delta0
        super().__init__(
            f"maps not delta0-close at node {node}: distance {dist:.6g} >= {delta0:.6g}"
        )


class CflError(SMFlowError, ValueError):
    pass


class ConvergenceError(SMFlowError, RuntimeError):
    pass


class InsufficientHistoryError(SMFlowError, ValueError):
    pass


class DegenerateDataError(SMFlowError, ValueError):
    pass


class ConfigError(SMFlowError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
