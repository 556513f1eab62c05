"""Feasible regions: membership, strict-interior tests and Euclidean projection.

Three compact convex regions with nonempty interior are supported: a Euclidean
ball, an axis-aligned box and the planar ellipse ``k1*x1**2 + k2*x2**2 <= r``.
Points are 1-D float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, ProjectionNonconvergence

#: slack margin below which a point counts as on (or outside) the boundary
TAU_INT = 1e-12
#: allowed constraint violation for closed membership
TAU_MEMBER = 1e-12
#: residual target of the ellipse secular solve (scaled by max(1, r))
TAU_PROJ = 1e-12
ELLIPSE_MAX_ITER = 200


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    constraint_residual: float
    landed_on_boundary: bool


def _as_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionMismatch(f"expected a point of dimension {dim}, got shape {x.shape}")
    return x


class _Region:
    """Shared behaviour; subclasses define ``dim``, ``slacks`` and ``project_rows``.

    The row-wise methods act on an ``(m, dim)`` array of points and treat each
    row independently, so results never depend on how rows are batched.
    """

    dim: int

    def slacks(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_rows(self, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def slack(self, x: np.ndarray) -> float:
        return float(self.slacks(x[None, :])[0])

    def project_point(self, y: np.ndarray) -> np.ndarray:
        return self.project_rows(y[None, :])[0]

    def contains(self, x) -> bool:
        return self.slack(_as_point(x, self.dim)) >= -TAU_MEMBER

    def strictly_interior(self, x) -> bool:
        return self.slack(_as_point(x, self.dim)) > TAU_INT

    def project(self, y) -> ProjectionResult:
        y = _as_point(y, self.dim)
        landed = self.slack(y) <= 0.0
        p = self.project_point(y)
        return ProjectionResult(p, -self.slack(p), bool(landed))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(_Region):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if c.size < 1 or not np.all(np.isfinite(c)):
            raise InvalidConfig("ball center must be a finite point")
        if not self.radius > 0:
            raise InvalidConfig("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def slacks(self, X):
        d = X - self.center
        return self.radius - np.sqrt(np.sum(d * d, axis=1))

    def project_rows(self, Y):
        d = Y - self.center
        nrm = np.sqrt(np.sum(d * d, axis=1))
        out = Y.copy()
        far = nrm > self.radius
        if far.any():
            out[far] = self.center + (self.radius / nrm[far])[:, None] * d[far]
        return out

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(_Region):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size < 1:
            raise InvalidConfig("box bounds must be nonempty and of equal length")
        if not np.all(lo < hi):
            raise InvalidConfig("box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def slacks(self, X):
        return np.minimum((X - self.lower).min(axis=1), (self.upper - X).min(axis=1))

    def project_rows(self, Y):
        return np.minimum(np.maximum(Y, self.lower), self.upper)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class Ellipse2D(_Region):
    """The planar region ``k1*x1**2 + k2*x2**2 <= r``."""

    k1: float
    k2: float
    r: float

    def __post_init__(self):
        for name in ("k1", "k2", "r"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise InvalidConfig(f"ellipse parameter {name} must be positive")
            object.__setattr__(self, name, v)

    dim = 2

    def constraint(self, x) -> float:
        return self.k1 * x[0] * x[0] + self.k2 * x[1] * x[1]

    def slacks(self, X):
        return self.r - (self.k1 * X[:, 0] * X[:, 0] + self.k2 * X[:, 1] * X[:, 1])

    def project_rows(self, Y):
        out = Y.copy()
        for i in np.flatnonzero(self.slacks(Y) < 0.0):
            y1, y2 = float(Y[i, 0]), float(Y[i, 1])
            lam = self._secular_root(y1, y2)
            out[i, 0] = y1 / (1.0 + 2.0 * lam * self.k1)
            out[i, 1] = y2 / (1.0 + 2.0 * lam * self.k2)
        return out

    def _secular_root(self, y1: float, y2: float) -> float:
        """Root of phi(lam) = sum k_i y_i^2 / (1 + 2 lam k_i)^2 - r on lam > 0.

        phi is convex and decreasing, so Newton steps are kept inside a
        shrinking bracket and replaced by bisection when they leave it.
        """
        k1, k2, r = self.k1, self.k2, self.r
        a1, a2 = k1 * y1 * y1, k2 * y2 * y2
        tol = TAU_PROJ * max(1.0, r)

        def phi(lam):
            d1 = 1.0 + 2.0 * lam * k1
            d2 = 1.0 + 2.0 * lam * k2
            return a1 / (d1 * d1) + a2 / (d2 * d2) - r, -4.0 * (k1 * a1 / d1**3 + k2 * a2 / d2**3)

        lo, hi = 0.0, 1.0
        f_hi, _ = phi(hi)
        while f_hi > 0.0:
            lo, hi = hi, 2.0 * hi
            f_hi, _ = phi(hi)
        lam = lo
        f, df = phi(lam)
        for _ in range(ELLIPSE_MAX_ITER):
            if abs(f) <= 1e-3 * tol:
                return lam
            if f > 0.0:
                lo = lam
            else:
                hi = lam
            if hi - lo <= 4.0 * math.ulp(hi):
                break
            step = lam - f / df if df < 0.0 else math.nan
            lam = step if lo < step < hi else 0.5 * (lo + hi)
            f, df = phi(lam)
        if abs(f) <= tol:
            return lam
        raise ProjectionNonconvergence(
            f"ellipse projection of ({y1!r}, {y2!r}) stalled with |phi| = {abs(f):.3e}"
        )

    def bounding_box(self):
        h = np.array([math.sqrt(self.r / self.k1), math.sqrt(self.r / self.k2)])
        return -h, h

    def to_dict(self):
        return {"type": "ellipse2d", "k1": self.k1, "k2": self.k2, "r": self.r}


FeasibleRegion = Union[Ball, Box, Ellipse2D]


def contains(region: FeasibleRegion, x) -> bool:
    return region.contains(x)


def strictly_interior(region: FeasibleRegion, x) -> bool:
    return region.strictly_interior(x)


def project(region: FeasibleRegion, y) -> ProjectionResult:
    return region.project(y)


def nonexpansiveness_gap(region: FeasibleRegion, y1, y2) -> float:
    """``||P(y1) - P(y2)|| - ||y1 - y2||``; never meaningfully positive."""
    y1 = _as_point(y1, region.dim)
    y2 = _as_point(y2, region.dim)
    p1 = region.project(y1).point
    p2 = region.project(y2).point
    return float(np.linalg.norm(p1 - p2) - np.linalg.norm(y1 - y2))


def region_from_dict(d: dict[str, Any]) -> FeasibleRegion:
    kind = d.get("type")
    try:
        if kind == "ball":
            return Ball(np.asarray(d["center"], dtype=float), d["radius"])
        if kind == "box":
            return Box(np.asarray(d["lower"], dtype=float), np.asarray(d["upper"], dtype=float))
        if kind == "ellipse2d":
            return Ellipse2D(d["k1"], d["k2"], d["r"])
    except KeyError as exc:
        raise InvalidConfig(f"region of type {kind!r} is missing {exc}") from None
    raise InvalidConfig(f"unknown region type {kind!r}")
