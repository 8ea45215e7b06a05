"""Exception types raised across the package."""


class RelhierError(Exception):
    """Base class for all package errors."""


class SingularMapError(RelhierError):
    """Jacobian of an observer map is not invertible at a point."""


class AlignmentError(RelhierError):
    """Tensors live at different base points."""


class SuperluminalError(RelhierError):
    """Relative velocity reaches or exceeds the speed of light."""


class InvalidFrameError(RelhierError):
    """A rotation path or time covector violates its defining constraints."""


class FrameIncompatibilityError(RelhierError):
    """Velocity addition denominator is not positive."""


class DegenerateSeedError(RelhierError):
    """Spatial seed vectors do not span the space W."""


class GeometryViolationError(RelhierError):
    """The inverse metric is not positive definite on W."""


class BasisDegeneracyError(RelhierError):
    """Gram matrix of a spatial basis is singular."""


class NonInvertibleMetricError(RelhierError):
    """Metric matrix is singular."""


class AccuracyError(RelhierError):
    """Quadrature did not converge to the requested accuracy."""


class VacuumError(RelhierError):
    """Mass density is not positive."""


class StructureError(RelhierError):
    """A source term is not affine in the flux."""


class NonEvolvingCurveError(RelhierError):
    """Curve tangent does not point forward in time."""


class TransformationError(RelhierError):
    """Singular weight matrix or map in a divergence system transform."""


class ConvergenceError(RelhierError):
    """Iterative point inversion failed."""


class ConfigError(RelhierError):
    """Scenario config could not be parsed or validated."""
