"""Exception hierarchy shared across the package."""


class ShocktubeError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveInput(ShocktubeError):
    """A physical parameter that must be positive was not."""


class DomainError(ShocktubeError):
    """State left the domain of definition of a right-hand side or EOS."""


class NonFiniteRHS(ShocktubeError):
    """Right-hand side returned NaN or Inf at the initial point."""


class NewtonDivergence(ShocktubeError):
    """Newton iteration inside an implicit stage failed to converge.

    Carries the partial trajectory up to the failing step when available.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class IntegratorFailure(ShocktubeError):
    """Integration failed for a reason outside the normal terminations."""


class InfeasibleConstant(ShocktubeError):
    """Integration constants lie strictly outside the closed feasible set."""


class NoSignChange(ShocktubeError):
    """Bisection endpoints classify identically; no boundary to trace."""


class NotFound(ShocktubeError):
    """Root search exhausted its seed budget (a numerics failure, not an
    existence statement)."""


class ZeroD0(ShocktubeError):
    """D(0) is numerically zero; the stability index is undefined."""


class NoLimit(ShocktubeError):
    """Large-frequency sign of the Evans function failed to stabilize."""


class FrameDegeneracy(ShocktubeError):
    """Orthonormality drift of an integrated frame exceeded its bound."""


class OnContourZero(ShocktubeError):
    """The Evans function appears to vanish on the sampling contour."""


class RefinementBudgetExceeded(ShocktubeError):
    """Adaptive contour refinement hit its evaluation budget."""


class AmbiguousUnwrap(ShocktubeError):
    """Consecutive argument jump too large for reliable phase unwrapping."""


class NoConvergence(ShocktubeError):
    """Algebraic Newton solve did not converge."""


class MultipleBranches(ShocktubeError):
    """Root-finding seed basin is ambiguous between solution branches."""


class ContinuationStall(ShocktubeError):
    """Parameter continuation could not progress past a step."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class OutOfDomain(ShocktubeError):
    """Requested interval is not contained in the computed domain."""


class FewerThanTwoIntersections(ShocktubeError):
    """Nullcline search found fewer than two intersections."""

    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found if found is not None else []


class SingularA11(ShocktubeError):
    """Hyperbolic block A11 is singular (violates the inflow hypothesis)."""


class SpecCondViolated(ShocktubeError):
    """The parabolic/hyperbolic compatibility condition fails."""


class SingularMap(ShocktubeError):
    """The linear map from the free constant to the right boundary value is
    numerically singular."""


class ConfigError(ShocktubeError):
    """Run configuration failed schema validation."""
