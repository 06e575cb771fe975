"""Exception types shared across the package."""


class EtseedError(Exception):
    """Base class for all package-specific errors."""


class BadParameter(EtseedError):
    """A scalar/enum argument is outside its documented domain."""


class NearPiRotation(EtseedError):
    """Rotation angle is within the singular band around pi.

    The principal log branch is ill-conditioned there; callers must opt in
    to the deterministic axis-extraction fallback.
    """


class CovarianceNotPSD(EtseedError):
    """Covariance failed Cholesky factorization beyond the jitter tolerance."""


class HorizonMismatch(EtseedError):
    """Model prediction horizon differs from the action sequence length."""


class DegenerateFrame(EtseedError):
    """Anchor vectors are too short or collinear to define a frame."""


class UnknownObservation(EtseedError):
    """The oracle's target provider has no ground truth for this cloud."""


class NonFiniteLoss(EtseedError):
    """Training loss became NaN/inf; carries the offending step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class AxiomViolation(EtseedError):
    """A multiplication table failed the group axioms."""


class LayoutMismatch(EtseedError):
    """Kernel kinds disagree with the declared chain layout."""


class TaskMismatch(EtseedError):
    """Two evaluation reports refer to different tasks."""


class IoFailure(EtseedError):
    """Dataset/checkpoint/report file could not be read or written."""
