"""Tensor-product Gauss-Legendre integration over the compact support.

Every integral the estimator needs (the partition function, model
moments, KL divergences) is a weighted sum over one fixed grid. Grid
nodes live in the scaled cube [-1, 1]^K; the weights carry the Jacobian
back to original coordinates, so ``weights.sum()`` is the volume of S.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core import MomentBasis
from .support import SupportRegion

MAX_DIM = 3
DEFAULT_NODES = {1: 256, 2: 64, 3: 32}
# ball supports are masked, so they get a finer grid; K=3 is capped for memory
DEFAULT_BALL_NODES = {1: 1024, 2: 256, 3: 64}


def default_nodes(dim: int, kind: str = "box") -> int:
    table = DEFAULT_BALL_NODES if kind == "ball" else DEFAULT_NODES
    if dim not in table:
        raise ValueError(_dim_message(dim))
    return table[dim]


def _dim_message(dim: int) -> str:
    return (
        f"K={dim} exceeds the supported maximum of {MAX_DIM}: tensor-product grids grow as "
        f"nodes_per_dim**K and become impractical beyond three dimensions"
    )


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray  # (Q, K) scaled coordinates
    points: np.ndarray  # (Q, K) original coordinates
    weights: np.ndarray  # (Q,) includes Jacobian and ball mask
    basis_values: np.ndarray  # (Q, L)
    basis: MomentBasis
    support: SupportRegion
    nodes_per_dim: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def gauss_legendre_box(dim: int, nodes_per_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor-product nodes and weights on [-1, 1]^dim (weights sum to 2^dim)."""
    x1, w1 = leggauss(nodes_per_dim)
    nodes = np.array(list(itertools.product(x1, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w1, repeat=dim))), axis=1)
    return nodes, weights


def build_grid(
    support: SupportRegion, basis: MomentBasis, nodes_per_dim: Optional[int] = None
) -> QuadratureGrid:
    """Gauss-Legendre grid over the support's bounding box with T precomputed.

    Ball supports drop the nodes outside the ball (indicator masking), so
    their total weight only approximates the ball volume.
    """
    dim = support.dim
    if dim > MAX_DIM:
        raise ValueError(_dim_message(dim))
    if basis.dim != dim:
        raise ValueError(f"basis has dim {basis.dim} but support has dim {dim}")
    if nodes_per_dim is None:
        nodes_per_dim = default_nodes(dim, support.kind)
    if nodes_per_dim < 2:
        raise ValueError("nodes_per_dim must be >= 2")
    if nodes_per_dim < basis.max_degree + 1:
        raise ValueError(
            f"nodes_per_dim={nodes_per_dim} is too small for degree {basis.max_degree}; "
            f"need at least {basis.max_degree + 1}"
        )

    ref_nodes, ref_weights = gauss_legendre_box(dim, nodes_per_dim)
    # the basis scaling maps the bounding box onto [-1, 1]^K
    half = 0.5 * (np.asarray(support.high) - np.asarray(support.low))
    centre = 0.5 * (np.asarray(support.high) + np.asarray(support.low))
    points = ref_nodes * half + centre
    weights = ref_weights * np.prod(half)
    if support.kind == "ball":
        keep = np.linalg.norm(points, axis=1) <= support.radius
        points, weights = points[keep], weights[keep]
    nodes = basis.scaling.forward(points)
    values = basis.evaluate(nodes)
    for arr in (nodes, points, weights, values):
        arr.setflags(write=False)
    return QuadratureGrid(nodes, points, weights, values, basis, support, nodes_per_dim)


def tilted_weights(grid: QuadratureGrid, lam: np.ndarray) -> Tuple[float, np.ndarray]:
    """``(log Z(lam), p)`` with ``p`` the normalized node masses of f_lam.

    Computed with the maximum exponent subtracted before exponentiating.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (grid.basis.size,):
        raise ValueError(f"lambda must have shape ({grid.basis.size},), got {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("lambda must be finite")
    a = grid.basis_values @ lam + np.log(grid.weights)
    top = a.max()
    s = np.exp(a - top)
    total = s.sum()
    return float(top + np.log(total)), s / total


def log_partition(grid: QuadratureGrid, lam: np.ndarray) -> float:
    """log of the integral of exp(lam'T(x)) over S."""
    return tilted_weights(grid, lam)[0]


def expectation_and_covariance(grid: QuadratureGrid, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of T under the normalized density f_lam."""
    _, p = tilted_weights(grid, lam)
    return _moments(grid.basis_values, p)


def _moments(values: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = p @ values
    centred = values - mean
    cov = (centred * p[:, None]).T @ centred
    return mean, 0.5 * (cov + cov.T)


def integrate(grid: QuadratureGrid, values: np.ndarray) -> float:
    """Weighted sum of function values at the grid's nodes."""
    return float(np.asarray(values, dtype=float) @ grid.weights)
