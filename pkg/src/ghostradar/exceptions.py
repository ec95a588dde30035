"""Exception types raised by ghostradar."""


class GhostRadarError(Exception):
    """Base class for all package errors."""


class RankDeficient(GhostRadarError, ValueError):
    """A response matrix is (numerically) rank deficient."""


class DegeneratePair(GhostRadarError, ValueError):
    """A first-order pair has identical departure and arrival angles."""


class SceneTooDense(GhostRadarError, ValueError):
    """More paths than the virtual array can identify (K0 + 2*K1 >= M)."""


class DegenerateDenominator(GhostRadarError, ArithmeticError):
    """The snapshot lies numerically inside the H1 subspace."""


class NoConvergence(GhostRadarError, RuntimeError):
    pass


class SingularSystem(GhostRadarError, ArithmeticError):
    """The damped normal equations of a refinement step are singular."""


class NoIdentifiedPaths(GhostRadarError, ValueError):
    """No true path was identified in any Monte Carlo run."""
