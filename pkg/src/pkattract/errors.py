"""Exception types shared across the package."""


class DynamicsError(Exception):
    """Base class for all package-specific errors."""


class ZeroVector(DynamicsError):
    """A homogeneous coordinate vector is numerically zero."""


class DimensionMismatch(DynamicsError):
    """Operands live on projective spaces of different dimensions."""


class ProjectionUndefined(DynamicsError):
    """Projection away from the fiber center point is not defined there."""


class IndeterminacyHit(DynamicsError):
    """All image coordinates vanished; impossible for a holomorphic map."""


class ChartSingular(DynamicsError):
    """The requested affine chart coordinate vanishes at this point."""


class NotInSurface(DynamicsError):
    """Point violates the equal-middle-coordinates invariant of the surface."""


class LambdaOutOfRange(DynamicsError):
    """Map parameter outside the validated trapping range."""


class TrapViolation(DynamicsError):
    """A sampled trap point escaped after one forward step."""


class InvalidPrehistory(DynamicsError):
    """Backward-orbit condition fails along the stored point list."""


class DepthExhausted(DynamicsError):
    """No deeper entry is available in a truncated history."""


class NotPeriodic(DynamicsError):
    """Claimed period is not satisfied within tolerance."""


class IndexBeyondDepth(DynamicsError):
    """Cylinder index exceeds the common depth of the sample."""


class TreeTooLarge(DynamicsError):
    """Exact preimage-tree enumeration would exceed the size budget."""


class NoConvergence(DynamicsError):
    """Iterative solver exhausted its budget."""


class InsufficientData(DynamicsError):
    """Estimator called with fewer inputs than its contract requires."""


class InsufficientSamples(DynamicsError):
    """Cloud too small for the requested fit degree."""


class PrecisionInsufficient(DynamicsError):
    """Residuals are indistinguishable from arithmetic noise."""


class DegenerateTarget(DynamicsError):
    """Target hit a critical value; caller should redraw."""


class MalformedRow(DynamicsError):
    """A CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class EmptyWindowWarning(UserWarning):
    """Almost all cloud mass fell outside the histogram window."""
