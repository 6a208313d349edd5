"""Compact support regions: axis-aligned boxes and centred balls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import SupportError


@dataclass(frozen=True)
class SupportRegion:
    """A compact set S on which every integral is taken.

    Use :meth:`box` or :meth:`ball` rather than the raw constructor.
    ``low``/``high`` always hold the bounding box; for a ball they are
    ``(-R, R)`` in every coordinate.
    """

    kind: str
    low: Tuple[float, ...]
    high: Tuple[float, ...]
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValueError(f"unknown support kind {self.kind!r}")
        if len(self.low) != len(self.high) or len(self.low) == 0:
            raise ValueError("support bounds must be nonempty and of equal length")
        for k, (lo, hi) in enumerate(zip(self.low, self.high)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ValueError(f"support coordinate {k}: need finite low < high, got [{lo}, {hi}]")
        if self.kind == "ball":
            if self.radius is None or not self.radius > 0 or not math.isfinite(self.radius):
                raise ValueError("ball support needs a finite positive radius")

    @classmethod
    def box(cls, bounds: Sequence[Tuple[float, float]]) -> "SupportRegion":
        low = tuple(float(b[0]) for b in bounds)
        high = tuple(float(b[1]) for b in bounds)
        return cls("box", low, high)

    @classmethod
    def ball(cls, radius: float, dim: int) -> "SupportRegion":
        if dim < 1:
            raise ValueError("dim must be >= 1")
        r = float(radius)
        return cls("ball", (-r,) * dim, (r,) * dim, r)

    @classmethod
    def auto(cls, points: np.ndarray, pad: float = 0.1) -> "SupportRegion":
        """Box padded by ``pad`` times the column range on every side."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = hi - lo
        # constant column: fall back to a unit-width pad
        span = np.where(span > 0, span, 1.0)
        return cls.box(list(zip(lo - pad * span, hi + pad * span)))

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod(np.subtract(self.high, self.low)))
        k = self.dim
        return math.pi ** (k / 2) * self.radius**k / math.gamma(k / 2 + 1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of rows inside S (boundary included)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(f"points have {points.shape[1]} columns, support has dim {self.dim}")
        if self.kind == "box":
            return np.all((points >= self.low) & (points <= self.high), axis=1)
        return np.linalg.norm(points, axis=1) <= self.radius

    def require_contains(self, points: np.ndarray) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(points)
        if self.kind == "ball":
            # the radius must strictly exceed every data norm
            inside &= np.linalg.norm(points, axis=1) < self.radius
        if not inside.all():
            row = int(np.flatnonzero(~inside)[0])
            raise SupportError(
                f"data row {row} ({points[row].tolist()}) lies outside the {self.describe()} support"
            )

    def describe(self) -> str:
        if self.kind == "ball":
            return f"ball(R={self.radius:g}, K={self.dim})"
        return "box " + " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.low, self.high))

    def y_section(self, x: np.ndarray) -> Tuple[float, float]:
        """Interval of the last coordinate that lies in S at leading coordinates ``x``."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim - 1:
            raise ValueError(f"conditioning point needs {self.dim - 1} coordinates, got {x.size}")
        if self.kind == "box":
            if np.any(x < self.low[:-1]) or np.any(x > self.high[:-1]):
                bounds = " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.low[:-1], self.high[:-1]))
                raise SupportError(f"conditioning point {x.tolist()} is outside the X-projection {bounds}")
            return self.low[-1], self.high[-1]
        rest = self.radius**2 - float(x @ x)
        if rest <= 0:
            raise SupportError(
                f"conditioning point {x.tolist()} is outside the X-projection (norm < {self.radius:g})"
            )
        h = math.sqrt(rest)
        return -h, h

    def marginal(self) -> "SupportRegion":
        """Projection of S onto all but the last coordinate."""
        if self.dim < 2:
            raise ValueError("cannot project a one-dimensional support")
        if self.kind == "box":
            return SupportRegion("box", self.low[:-1], self.high[:-1])
        return SupportRegion.ball(self.radius, self.dim - 1)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "low": list(self.low), "high": list(self.high)}
        if self.kind == "ball":
            out["radius"] = self.radius
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SupportRegion":
        if d["kind"] == "ball":
            return cls.ball(d["radius"], len(d["low"]))
        return cls.box(list(zip(d["low"], d["high"])))


def parse_support(text: str, points: Optional[np.ndarray] = None, dim: Optional[int] = None) -> SupportRegion:
    """Parse ``"box:lo1,hi1;lo2,hi2"``, ``"ball:R"`` or ``"auto"``."""
    text = text.strip()
    if text == "auto":
        if points is None:
            raise ValueError("auto support needs data")
        return SupportRegion.auto(points)
    kind, _, rest = text.partition(":")
    if kind == "box":
        bounds = []
        for part in rest.split(";"):
            pieces = part.split(",")
            if len(pieces) != 2:
                raise ValueError(f"box bound {part!r} must be 'lo,hi'")
            bounds.append((float(pieces[0]), float(pieces[1])))
        region = SupportRegion.box(bounds)
    elif kind == "ball":
        if dim is None:
            if points is None:
                raise ValueError("ball support needs the data dimension")
            dim = np.atleast_2d(points).shape[1]
        region = SupportRegion.ball(float(rest), dim)
    else:
        raise ValueError(f"support must be 'box:...', 'ball:R' or 'auto', got {text!r}")
    if dim is not None and region.dim != dim:
        raise ValueError(f"support has dim {region.dim} but data has {dim} columns")
    return region
