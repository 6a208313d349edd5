"""Exception hierarchy for maxent_oie."""


class MaxEntError(Exception):
    """Base class for all package errors."""


class SupportError(MaxEntError, ValueError):
    """Data or evaluation point lies outside the support region."""


class NotConvergedError(MaxEntError):
    """Newton iterations stopped without reaching the gradient tolerance."""


class InfeasibleMomentsError(MaxEntError):
    """Sample moments are on or outside the boundary of the attainable set.

    The dual iterates diverge in norm when this happens. Enlarging the
    support almost always fixes it.
    """


class SingularBasisError(MaxEntError):
    """Moment covariance is rank-deficient under the uniform prior."""


class DegenerateConditionalError(MaxEntError):
    """Marginal density at the conditioning point is numerically zero."""


class AbsoluteContinuityError(MaxEntError):
    """Reference density vanishes where the other density has mass."""


class AllFitsFailedError(MaxEntError):
    """No degree in a sweep produced a converged fit."""
