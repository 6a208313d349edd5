"""Datasets, monomial moment bases, affine scaling and sample moments."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import comb
from typing import List, Tuple

import numpy as np

from .support import SupportRegion

MultiIndex = Tuple[int, ...]

# Hard ceiling on the basis length; C(K+A, A) explodes quickly.
MAX_BASIS_SIZE = 100_000


@dataclass(frozen=True, eq=False)
class Dataset:
    """N observations in K dimensions, stored as a read-only float array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"dataset must be a nonempty N x K matrix, got shape {pts.shape}")
        bad = ~np.isfinite(pts)
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            raise ValueError(f"dataset row {row} contains a non-finite value")
        pts.setflags(write=False)
        object.__setattr__(self, "points", np.ascontiguousarray(pts))

    @property
    def n_rows(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def columns(self, idx) -> "Dataset":
        return Dataset(self.points[:, idx])

    def fingerprint(self) -> dict:
        """Row count and a SHA-256 of the little-endian float64 payload."""
        payload = np.ascontiguousarray(self.points, dtype="<f8").tobytes()
        digest = hashlib.sha256()
        digest.update(f"{self.n_rows}x{self.dim}:".encode())
        digest.update(payload)
        return {"n_rows": self.n_rows, "n_cols": self.dim, "sha256": digest.hexdigest()}


def enumerate_multi_indices(dim: int, max_degree: int) -> List[MultiIndex]:
    """All exponent vectors with total degree 1..max_degree in graded-lex order.

    Within one total degree the first coordinate's exponent decreases, so for
    ``dim=2, max_degree=2`` the result is ``[(1,0), (0,1), (2,0), (1,1), (0,2)]``.
    The degree-(A-1) list is always a prefix of the degree-A list.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1; a degree-0 basis leaves the dual problem empty")
    size = comb(dim + max_degree, max_degree) - 1
    if size > MAX_BASIS_SIZE:
        raise ValueError(
            f"basis for K={dim}, A={max_degree} would have {size} terms (limit {MAX_BASIS_SIZE})"
        )

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    out: List[MultiIndex] = []
    for degree in range(1, max_degree + 1):
        out.extend(compositions(degree, dim))
    return out


@dataclass(frozen=True)
class AffineMap:
    """x -> (x - shift) / scale, componentwise."""

    shift: Tuple[float, ...]
    scale: Tuple[float, ...]

    def __post_init__(self):
        if len(self.shift) != len(self.scale):
            raise ValueError("shift and scale must have the same length")
        if not all(s > 0 and np.isfinite(s) for s in self.scale):
            raise ValueError("every scale component must be finite and positive")

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.shift)

    @property
    def log_jacobian(self) -> float:
        """log of dx / dx_scaled, the volume element of the inverse map."""
        return float(np.sum(np.log(self.scale)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.shift)) / np.asarray(self.scale)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) * np.asarray(self.scale) + np.asarray(self.shift)


def fit_scaling(data: Dataset, support: SupportRegion) -> AffineMap:
    """Affine map sending the support's bounding box onto [-1, 1]^K.

    Raises :class:`~maxent_oie.errors.SupportError` naming the first row
    that falls outside ``support``.
    """
    if data.dim != support.dim:
        raise ValueError(f"data has {data.dim} columns but support has dim {support.dim}")
    support.require_contains(data.points)
    low = np.asarray(support.low)
    high = np.asarray(support.high)
    return AffineMap(tuple((0.5 * (low + high)).tolist()), tuple((0.5 * (high - low)).tolist()))


@dataclass(frozen=True, eq=False)
class MomentBasis:
    """Monomials x^alpha of the scaled coordinates for 1 <= |alpha| <= A."""

    indices: Tuple[MultiIndex, ...]
    max_degree: int
    scaling: AffineMap

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("basis indices must be distinct")
        if any(sum(a) < 1 or len(a) != self.scaling.dim for a in self.indices):
            raise ValueError("basis indices need total degree >= 1 and one exponent per dimension")

    @classmethod
    def monomial(cls, dim: int, max_degree: int, scaling: AffineMap | None = None) -> "MomentBasis":
        scaling = scaling or AffineMap.identity(dim)
        if scaling.dim != dim:
            raise ValueError("scaling dimension does not match basis dimension")
        return cls(tuple(enumerate_multi_indices(dim, max_degree)), max_degree, scaling)

    @property
    def dim(self) -> int:
        return self.scaling.dim

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.intp).reshape(self.size, self.dim)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """T(u) for already-scaled points ``u`` of shape (N, K); returns (N, L)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dim:
            raise ValueError(f"points have {u.shape[1]} columns, basis has dim {self.dim}")
        powers = np.ones((u.shape[0], self.dim, self.max_degree + 1))
        for p in range(1, self.max_degree + 1):
            powers[:, :, p] = powers[:, :, p - 1] * u
        exps = self.exponents
        out = np.ones((u.shape[0], self.size))
        for k in range(self.dim):
            out *= powers[:, k, exps[:, k]]
        return out

    def evaluate_original(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(self.scaling.forward(np.atleast_2d(x)))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "max_degree": self.max_degree,
            "indices": [list(a) for a in self.indices],
        }

    def same_as(self, other: "MomentBasis") -> bool:
        return self.indices == other.indices and self.scaling == other.scaling


@dataclass(frozen=True, eq=False)
class SampleMoments:
    values: np.ndarray
    basis: MomentBasis
    n: int


def pairwise_mean(rows: np.ndarray) -> np.ndarray:
    """Column means with numpy's pairwise summation along a contiguous axis.

    The row-major (N, L) matrix is transposed to contiguous (L, N) first so
    the reduction order is fixed by N alone.
    """
    cols = np.ascontiguousarray(np.asarray(rows, dtype=np.float64).T)
    return cols.sum(axis=1) / cols.shape[1]


def sample_moments(data: Dataset, basis: MomentBasis) -> SampleMoments:
    """Average of T over the rows of ``data`` (original coordinates).

    The basis' scaling is applied here, so callers pass raw observations.
    """
    if data.dim != basis.dim:
        raise ValueError(f"data has {data.dim} columns but basis has dim {basis.dim}")
    values = pairwise_mean(basis.evaluate_original(data.points))
    values.setflags(write=False)
    return SampleMoments(values, basis, data.n_rows)
