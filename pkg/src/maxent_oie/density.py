"""Evaluating the fitted exponential-family density and its conditionals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core import MomentBasis
from .errors import AbsoluteContinuityError, DegenerateConditionalError
from .quadrature import QuadratureGrid
from .solver import MaxEntFit
from .support import SupportRegion

DEFAULT_Y_NODES = 256
_LOG_TINY = np.log(1e-300)


@dataclass(frozen=True, eq=False)
class MaxEntDensity:
    """f(x) = exp(lam'T(x) - log Z) on S, zero outside, in original coordinates."""

    basis: MomentBasis
    support: SupportRegion
    lambda_hat: np.ndarray
    log_normalizer: float

    @classmethod
    def from_fit(cls, fit: MaxEntFit) -> "MaxEntDensity":
        return cls(fit.basis, fit.support, np.asarray(fit.lambda_hat), fit.log_partition_at_opt)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            if self.dim == 1 and x.shape[0] == 1:
                x = x.T
            else:
                raise ValueError(f"points need {self.dim} columns, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation points must be finite")
        out = np.full(x.shape[0], -np.inf)
        inside = self.support.contains(x)
        if inside.any():
            out[inside] = self.basis.evaluate_original(x[inside]) @ self.lambda_hat - self.log_normalizer
        return out

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    __call__ = pdf


def density_at(d: MaxEntDensity, x) -> float:
    """Density at a single point; 0.0 outside the support."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(d.pdf(x)[0])


@dataclass(frozen=True)
class ConditionalTable:
    """f(y | x) tabulated on Gauss-Legendre nodes of the y-section."""

    given: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    log_marginal: float

    @property
    def total(self) -> float:
        return float(self.values @ self.weights)

    def expectation(self) -> float:
        return float((self.y * self.values) @ self.weights)


def _y_rule(interval: Tuple[float, float], n: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = leggauss(n)
    lo, hi = interval
    half = 0.5 * (hi - lo)
    return t * half + 0.5 * (hi + lo), w * half


def _slice_log_density(joint: MaxEntDensity, x: np.ndarray, y_nodes: int):
    if joint.dim < 2:
        raise ValueError("conditioning needs a joint density of dimension >= 2 (response last)")
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("conditioning point must be finite")
    y, w = _y_rule(joint.support.y_section(x), y_nodes)
    pts = np.column_stack([np.repeat(x[None, :], y.size, axis=0), y])
    logf = joint.basis.evaluate_original(pts) @ joint.lambda_hat - joint.log_normalizer
    top = logf.max()
    log_marg = float(top + np.log(np.exp(logf - top) @ w))
    return x, y, w, logf, log_marg


def marginal_log_density(joint: MaxEntDensity, x, y_nodes: int = DEFAULT_Y_NODES) -> float:
    """log of the integral of the joint over the response at ``x``."""
    return _slice_log_density(joint, x, y_nodes)[4]


def conditional_density(joint: MaxEntDensity, x, y_nodes: int = DEFAULT_Y_NODES) -> ConditionalTable:
    """f(y | x) = f(x, y) / f(x) with the marginal taken by the same 1D rule.

    The response is the last coordinate of ``joint``.
    """
    x, y, w, logf, log_marg = _slice_log_density(joint, x, y_nodes)
    if log_marg < _LOG_TINY:
        raise DegenerateConditionalError(
            f"marginal density at x={x.tolist()} is below 1e-300; the slice is numerically empty"
        )
    return ConditionalTable(x, y, w, np.exp(logf - log_marg), log_marg)


def conditional_expectation(joint: MaxEntDensity, x, y_nodes: int = DEFAULT_Y_NODES) -> float:
    return conditional_density(joint, x, y_nodes).expectation()


Density = Callable[[np.ndarray], np.ndarray]


def _log_values(d, pts: np.ndarray) -> np.ndarray:
    if hasattr(d, "log_pdf"):
        return np.asarray(d.log_pdf(pts), dtype=float)
    v = np.asarray(d(pts), dtype=float)
    if np.any(v < 0):
        raise ValueError("density values must be nonnegative")
    with np.errstate(divide="ignore"):
        return np.log(v)


def kl_divergence(p: Density, q: Density, grid: QuadratureGrid) -> float:
    """KL(p || q) as a weighted sum over ``grid`` nodes in original coordinates.

    ``p`` and ``q`` map an (M, K) array of points to M density values; objects
    with a ``log_pdf`` method are evaluated in log space. Small negative totals
    from quadrature noise are clamped to zero.
    """
    pts = grid.points
    logp = _log_values(p, pts)
    logq = _log_values(q, pts)
    if logp.shape != (grid.size,) or logq.shape != (grid.size,):
        raise ValueError("densities must return one value per grid node")
    pv = np.exp(logp)
    bad = (logq == -np.inf) & (pv > 1e-12)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise AbsoluteContinuityError(f"q vanishes at node {pts[i].tolist()} where p = {pv[i]:.3e}")
    use = (pv > 0) & np.isfinite(logq)
    terms = np.zeros_like(pv)
    terms[use] = pv[use] * (logp[use] - logq[use])
    kl = float(terms @ grid.weights)
    if kl < 0:
        if kl < -1e-8:
            raise ValueError(f"KL estimate {kl:.3e} is negative beyond quadrature noise")
        kl = 0.0
    return kl


def evaluation_table(d: MaxEntDensity, points_per_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Evenly spaced points over the support's bounding box and the density there."""
    if points_per_dim < 2:
        raise ValueError("points_per_dim must be >= 2")
    axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in zip(d.support.low, d.support.high)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    return pts, d.pdf(pts)
