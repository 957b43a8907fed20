"""Exception types shared across the package."""


class GlueLabError(Exception):
    pass


class ChartExceeded(GlueLabError):
    """Point left the validity region of the affine chart."""


class StepTooLarge(GlueLabError):
    """Exponential-map step exceeds the injectivity gate."""


class OutOfInjectivity(GlueLabError):
    """Two points too far apart for log/transport."""


class ShapeMismatch(GlueLabError):
    pass


class GridTooShort(GlueLabError):
    pass


class EmptySet(GlueLabError):
    pass


class StepRejected(GlueLabError):
    """ODE controller could not meet its tolerance."""


class DegenerateBasis(GlueLabError):
    pass


class MatchingViolated(GlueLabError):
    """Joint matching condition of a disk-flow-disk triple fails."""


class ModeZeroPresent(GlueLabError):
    """A zero mode was passed where only higher modes are allowed."""


class TransversalityFailed(GlueLabError):
    """Two-point boundary problem for the zero mode is not solvable."""


class NotContractive(GlueLabError):
    """Approximate inverse does not contract; refinement refused."""


class HypothesisFailed(GlueLabError):
    """Quantitative IFT hypothesis (residual vs radius) not met."""


class Diverged(GlueLabError):
    pass


class GammaOutOfRange(GlueLabError):
    pass


class DiameterTooLarge(GlueLabError):
    pass


class NoConvergence(GlueLabError):
    pass


class AllZero(GlueLabError):
    """Decay fit requested on an all-zero sequence."""


class BoundViolated(GlueLabError):
    """A certified bound failed at some node; carries the offender."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConfigInvalid(GlueLabError):
    pass
