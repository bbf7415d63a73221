"""Exception and warning types shared across the package."""


class PolyTVError(Exception):
    """Base class for all polytv errors."""


class PointOnBoundary(PolyTVError):
    """A query point lies (within tolerance) on a polygon edge."""


class QuadratureNotConverged(PolyTVError):
    """Adaptive subdivision hit its depth limit before meeting the tolerance."""


class ResampleBrokeSimplicity(PolyTVError):
    """Arclength resampling produced a self-intersecting polygon."""


class NoContourFound(PolyTVError):
    """Level-set extraction found no usable closed contour."""


class DegenerateAngle(PolyTVError):
    """An exterior angle too close to 0 or +-pi for the optimality residual."""


class StalledAtNonSimple(PolyTVError):
    """Every trial ascent step down to the minimum broke polygon simplicity."""


class MaxItersReached(PolyTVError):
    """Outer loop exhausted its iteration budget."""


class AssumptionViolated(PolyTVError):
    """A radial profile fails the unimodality assumption (or a bracket failed)."""


class ConfigError(PolyTVError):
    """Malformed or inconsistent run configuration."""


class NotConvergedWarning(UserWarning):
    """An iterative solver returned its best iterate without meeting tolerance."""


class OverlapWarning(UserWarning):
    """Two atom boundaries are close enough that TV additivity may fail."""


class OracleFallbackWarning(UserWarning):
    """Polygonal refinement failed; the mesh-stage polygon is used instead."""
