"""Damped Newton ascent on the reduced dual  max_lam  lam'T_hat - log Z(lam).

The dual is smooth and concave, its gradient is the moment mismatch
``T_hat - E_lam[T]`` and its Hessian is ``-Cov_lam[T]``. Each Newton step
solves ``(Cov + mu I) d = grad`` with ``mu`` raised tenfold until the
Cholesky factorisation succeeds, then backtracks until the dual value rises.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import Dataset, MomentBasis, SampleMoments, fit_scaling, sample_moments
from .errors import InfeasibleMomentsError, NotConvergedError, SingularBasisError
from .quadrature import QuadratureGrid, _moments, build_grid, tilted_weights
from .support import SupportRegion

log = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e6
# reciprocal condition number of Cov at lam=0 below which the basis is degenerate
SINGULAR_RCOND = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-8
    max_iters: int = 100
    ridge_floor: float = 1e-10
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    max_halvings: int = 40

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.ridge_floor > 0 and self.sufficient_increase > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iters < 1 or self.max_halvings < 1:
            raise ValueError("max_iters and max_halvings must be >= 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    dual_value: float
    grad_norm: float
    step_length: float
    ridge: float


@dataclass(frozen=True, eq=False)
class MaxEntFit:
    """Result of :func:`solve_dual`."""

    lambda_hat: np.ndarray
    log_partition_at_opt: float
    dual_value: float
    iterations: int
    grad_norm_final: float
    converged: bool
    moments: SampleMoments
    grid: QuadratureGrid
    config: SolverConfig
    trace: Tuple[IterationRecord, ...] = field(default=())

    @property
    def h_min(self) -> float:
        """Minimized KL information relative to Lebesgue measure on S."""
        return self.dual_value

    @property
    def basis(self) -> MomentBasis:
        return self.grid.basis

    @property
    def support(self) -> SupportRegion:
        return self.grid.support

    @property
    def n_params(self) -> int:
        return self.basis.size

    @property
    def log_likelihood(self) -> float:
        """Exponential-family log-likelihood of the fitted data, N times the dual value."""
        return self.moments.n * self.dual_value

    def require_converged(self) -> None:
        if not self.converged:
            raise NotConvergedError(
                f"fit did not converge after {self.iterations} iterations "
                f"(gradient norm {self.grad_norm_final:.3e} > tol {self.config.grad_tol:.1e})"
            )


def dual_objective(
    grid: QuadratureGrid, moments: SampleMoments, lam: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of  lam'T_hat - log Z(lam)."""
    _check_compatible(grid, moments)
    log_z, p = tilted_weights(grid, lam)
    mean, cov = _moments(grid.basis_values, p)
    value = float(np.asarray(lam) @ moments.values) - log_z
    return value, moments.values - mean, -cov


def dual_value(grid: QuadratureGrid, moments: SampleMoments, lam: np.ndarray) -> float:
    return float(np.asarray(lam) @ moments.values) - tilted_weights(grid, lam)[0]


def _check_compatible(grid: QuadratureGrid, moments: SampleMoments) -> None:
    if not grid.basis.same_as(moments.basis):
        raise ValueError("grid and sample moments were built from different bases")
    if not np.all(np.isfinite(moments.values)):
        raise ValueError("sample moments must be finite")


def _newton_direction(cov: np.ndarray, grad: np.ndarray, ridge_floor: float) -> Tuple[np.ndarray, float]:
    eye = np.eye(cov.shape[0])
    # the floor is relative to the covariance scale so tiny-variance bases still factor
    mu = ridge_floor * max(1.0, float(np.max(np.diag(cov))))
    for _ in range(60):
        try:
            factor = cho_factor(cov + mu * eye, lower=True, check_finite=True)
        except (LinAlgError, ValueError):
            mu *= 10.0
            continue
        return cho_solve(factor, grad), mu
    raise LinAlgError("ridge escalation failed to produce a positive definite system")


def solve_dual(
    grid: QuadratureGrid,
    moments: SampleMoments,
    config: Optional[SolverConfig] = None,
    lambda0: Optional[np.ndarray] = None,
) -> MaxEntFit:
    """Maximize the reduced dual by damped Newton-Raphson.

    Starts from ``lambda0`` (default zero, the uniform density on S). An
    unconverged run is returned with ``converged=False``; divergence of the
    iterates raises :class:`InfeasibleMomentsError` and a rank-deficient
    moment covariance under the uniform start raises
    :class:`SingularBasisError`.
    """
    config = config or SolverConfig()
    _check_compatible(grid, moments)
    L = grid.basis.size
    lam = np.zeros(L) if lambda0 is None else np.array(lambda0, dtype=float)
    if lam.shape != (L,):
        raise ValueError(f"lambda0 must have shape ({L},)")

    _, cov0 = _moments(grid.basis_values, tilted_weights(grid, np.zeros(L))[1])
    eig = np.linalg.eigvalsh(cov0)
    if eig[0] <= SINGULAR_RCOND * max(eig[-1], np.finfo(float).tiny):
        raise SingularBasisError(
            f"moment covariance under the uniform density is rank-deficient "
            f"(eigenvalue ratio {eig[0] / eig[-1] if eig[-1] > 0 else 0.0:.2e}); "
            f"the basis functions are affinely dependent on the support"
        )

    trace: List[IterationRecord] = []
    value, grad, hess = dual_objective(grid, moments, lam)
    gnorm = float(np.max(np.abs(grad)))
    trace.append(IterationRecord(0, value, gnorm, 0.0, 0.0))
    iters = 0
    polished = False
    while True:
        if gnorm <= config.grad_tol:
            # one extra step buys several digits at quadratic rate
            if polished or gnorm == 0.0:
                break
            polished = True
        if iters >= config.max_iters:
            break
        iters += 1
        try:
            step, mu = _newton_direction(-hess, grad, config.ridge_floor)
        except LinAlgError:
            break
        slope = float(grad @ step)
        t = 1.0
        accepted = False
        for _ in range(config.max_halvings):
            trial = lam + t * step
            if not np.all(np.isfinite(trial)):
                t *= config.shrink
                continue
            v_trial, g_trial, h_trial = dual_objective(grid, moments, trial)
            g_trial_norm = float(np.max(np.abs(g_trial)))
            if v_trial >= value + config.sufficient_increase * t * slope:
                accepted = True
            elif (
                v_trial >= value - 16 * np.finfo(float).eps * max(1.0, abs(value))
                and g_trial_norm < gnorm
            ):
                # the increase is below rounding; judge progress by the gradient instead
                accepted = True
            if accepted:
                break
            t *= config.shrink
        if not accepted:
            if polished:
                break
            if np.max(np.abs(lam)) > DIVERGENCE_NORM / 10:
                raise _infeasible(lam)
            log.debug("line search failed at iteration %d", iters)
            break
        lam, value, grad, hess, gnorm = trial, v_trial, g_trial, h_trial, g_trial_norm
        trace.append(IterationRecord(iters, value, gnorm, t, mu))
        log.debug("iter %d: dual=%.15g |grad|=%.3e t=%.3g mu=%.1e", iters, value, gnorm, t, mu)
        if np.max(np.abs(lam)) > DIVERGENCE_NORM:
            raise _infeasible(lam)

    converged = gnorm <= config.grad_tol
    if not converged:
        log.warning("dual solve stopped after %d iterations with |grad|=%.3e", iters, gnorm)
    lam.setflags(write=False)
    log_z = tilted_weights(grid, lam)[0]
    value = float(lam @ moments.values) - log_z
    return MaxEntFit(
        lambda_hat=lam,
        log_partition_at_opt=log_z,
        dual_value=value,
        iterations=iters,
        grad_norm_final=gnorm,
        converged=converged,
        moments=moments,
        grid=grid,
        config=config,
        trace=tuple(trace),
    )


def _infeasible(lam: np.ndarray) -> InfeasibleMomentsError:
    return InfeasibleMomentsError(
        f"dual iterates diverged (|lambda|_inf = {np.max(np.abs(lam)):.3e}); the sample moments "
        f"lie on or outside the boundary of the attainable moment set. Enlarge the support."
    )


def kl_vs_uniform(fit: MaxEntFit) -> float:
    """Integral of f_hat log f_hat over S at the optimum (may be negative)."""
    fit.require_converged()
    return fit.h_min


def fit_maxent(
    data: Dataset,
    support: SupportRegion,
    degree: int,
    nodes_per_dim: Optional[int] = None,
    config: Optional[SolverConfig] = None,
) -> MaxEntFit:
    """Scale, build the degree-``degree`` monomial basis and grid, then solve."""
    scaling = fit_scaling(data, support)
    basis = MomentBasis.monomial(data.dim, degree, scaling)
    grid = build_grid(support, basis, nodes_per_dim)
    return solve_dual(grid, sample_moments(data, basis), config)
