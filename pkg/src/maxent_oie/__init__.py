"""Maximum-entropy density estimation by Newton's method on the convex dual.

The fitted exponential family doubles as an absolute benchmark ("model 0")
for BIC-based comparison of parametric models.
"""

from .core import AffineMap, Dataset, MomentBasis, SampleMoments, enumerate_multi_indices, fit_scaling, sample_moments
from .density import (
    ConditionalTable,
    MaxEntDensity,
    conditional_density,
    conditional_expectation,
    density_at,
    kl_divergence,
    marginal_log_density,
)
from .errors import (
    AbsoluteContinuityError,
    AllFitsFailedError,
    DegenerateConditionalError,
    InfeasibleMomentsError,
    MaxEntError,
    NotConvergedError,
    SingularBasisError,
    SupportError,
)
from .quadrature import QuadratureGrid, build_grid, expectation_and_covariance, log_partition
from .selection import (
    DegreeSweepResult,
    ModelScore,
    Rival,
    compare_conditional,
    compare_unconditional,
    evidence,
    posterior_probabilities,
    sweep_degrees,
)
from .solver import MaxEntFit, SolverConfig, dual_objective, fit_maxent, kl_vs_uniform, solve_dual
from .support import SupportRegion

__version__ = "0.1.0"
