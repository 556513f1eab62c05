"""Objectives with subgradient maps that may be undefined on the boundary.

``subgradient`` never raises for a missing subgradient; it returns
:class:`Undefined` instead, so that solvers can treat nonexistence as data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Union

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, OutOfDomain, UnknownInstance
from .sets import TAU_INT, TAU_MEMBER, Box, Ellipse2D, FeasibleRegion


@dataclass(frozen=True, eq=False)
class Available:
    g: np.ndarray


@dataclass(frozen=True)
class Undefined:
    reason: str


SubgradientOutcome = Union[Available, Undefined]


class Oracle:
    """Base class. Subclasses set the metadata attributes and implement the
    row-wise ``values`` / ``subgradients`` on already-validated ``(m, n)``
    arrays; ``subgradients`` returns the stacked vectors and a mask of rows
    where a subgradient exists (other rows hold zeros)."""

    id: str
    region: FeasibleRegion
    radius_R: float
    f_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None
    lipschitz_L: Optional[float] = None
    strong_mu: Optional[float] = None

    @property
    def dimension(self) -> int:
        return self.region.dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"{self.id} expects dimension {self.dimension}, got shape {x.shape}"
            )
        return x

    def evaluate(self, x) -> float:
        x = self._check(x)
        if not self.region.slack(x) >= -TAU_MEMBER:
            raise OutOfDomain(f"{self.id}: point outside the feasible region")
        return self._value(x)

    def subgradient(self, x) -> SubgradientOutcome:
        return self._subgradient(self._check(x))

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subgradients(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _undefined_reason(self, x: np.ndarray) -> str:
        return "no subgradient at this point"

    def _value(self, x: np.ndarray) -> float:
        return float(self.values(x[None, :])[0])

    def _subgradient(self, x: np.ndarray) -> SubgradientOutcome:
        G, ok = self.subgradients(x[None, :])
        if ok[0]:
            return Available(G[0])
        return Undefined(self._undefined_reason(x))

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.to_dict()}>"


class EllipseSqrt(Oracle):
    """f(x) = -sqrt(r - k1 x1^2 - k2 x2^2) on its own ellipse.

    No subgradient exists anywhere on the boundary ellipse.
    """

    def __init__(self, k1: float = 2.0, k2: float = 5.0, r: float = 100.0):
        self.region = Ellipse2D(k1, k2, r)
        self.k1, self.k2, self.r = self.region.k1, self.region.k2, self.region.r
        self.id = "e1"
        self.f_star = -math.sqrt(self.r)
        self.x_star = np.zeros(2)
        self.radius_R = max(math.sqrt(self.r / self.k1), math.sqrt(self.r / self.k2))

    def values(self, X):
        return -np.sqrt(np.maximum(self.region.slacks(X), 0.0))

    def subgradients(self, X):
        slack = self.region.slacks(X)
        ok = slack > TAU_INT
        root = np.sqrt(np.where(ok, slack, 1.0))
        G = np.empty_like(X)
        G[:, 0] = self.k1 * X[:, 0] / root
        G[:, 1] = self.k2 * X[:, 1] / root
        G[~ok] = 0.0
        return G, ok

    def _undefined_reason(self, x):
        return "boundary of the ellipse"

    def to_dict(self):
        return {"example": "e1", "k1": self.k1, "k2": self.k2, "r": self.r}


class RenegarRatio(Oracle):
    """f(x) = (x1^2 + x2^2) / x1 on [0, 1] x [-1, 1], with f(0, 0) = 0.

    Not Lipschitz on any level set; no subgradient on the edge x1 = 0.
    """

    def __init__(self):
        self.id = "e2"
        self.region = Box(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
        self.f_star = 0.0
        self.x_star = np.zeros(2)
        self.radius_R = math.sqrt(2.0)

    def values(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        if (x1 < 0.0).any():
            raise OutOfDomain("e2 is undefined for x1 < 0")
        pos = x1 > 0.0
        safe = np.where(pos, x1, 1.0)
        edge = np.where(x2 == 0.0, 0.0, math.inf)
        return np.where(pos, (x1 * x1 + x2 * x2) / safe, edge)

    def subgradients(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        pos = x1 > 0.0
        with np.errstate(over="ignore"):
            t = x2 / np.where(pos, x1, 1.0)
            G = np.empty_like(X)
            G[:, 0] = 1.0 - t * t
            G[:, 1] = 2.0 * t
        ok = pos & np.isfinite(G).all(axis=1)
        G[~ok] = 0.0
        return G, ok

    def _undefined_reason(self, x):
        if x[0] <= 0.0:
            return "no subgradient selection at the origin" if x[1] == 0.0 else "edge x1 = 0"
        return "subgradient overflow next to the edge x1 = 0"

    def to_dict(self):
        return {"example": "e2"}


class NegEntropy(Oracle):
    """f(x) = sum x_i log x_i on [0, B]^n (0 log 0 = 0), mu = 1/B strongly convex."""

    def __init__(self, n: int = 10, B: float = 2.0):
        n = int(n)
        B = float(B)
        if n < 1 or not B > 0:
            raise InvalidConfig("negative entropy needs n >= 1 and B > 0")
        self.id = "e3"
        self.n, self.B = n, B
        self.region = Box(np.zeros(n), np.full(n, B))
        xs = min(math.exp(-1.0), B)
        self.x_star = np.full(n, xs)
        self.f_star = n * xs * math.log(xs)
        self.strong_mu = 1.0 / B
        self.radius_R = math.sqrt(n) * max(xs, B - xs)

    def values(self, X):
        pos = X > 0.0
        if pos.all():
            return np.sum(X * np.log(X), axis=1)
        return np.sum(np.where(pos, X * np.log(np.where(pos, X, 1.0)), 0.0), axis=1)

    def subgradients(self, X):
        ok = X.min(axis=1) > TAU_INT
        G = 1.0 + np.log(np.where(X > 0.0, X, 1.0))
        G[~ok] = 0.0
        return G, ok

    def _undefined_reason(self, x):
        return "coordinate on the face x_i = 0"

    def to_dict(self):
        return {"example": "e3", "n": self.n, "B": self.B}


class L1Box(Oracle):
    """||x||_1 on [-1, 1]^n; subgradient sign(x) with sign(0) = +1."""

    def __init__(self, n: int = 2):
        n = int(n)
        if n < 1:
            raise InvalidConfig("n must be positive")
        self.id = "l1-box"
        self.n = n
        self.region = Box(-np.ones(n), np.ones(n))
        self.f_star = 0.0
        self.x_star = np.zeros(n)
        self.lipschitz_L = math.sqrt(n)
        self.radius_R = math.sqrt(n)

    def values(self, X):
        return np.abs(X).sum(axis=1)

    def subgradients(self, X):
        return np.where(X >= 0.0, 1.0, -1.0), np.ones(X.shape[0], dtype=bool)

    def to_dict(self):
        return {"example": "l1-box", "n": self.n}


class MaxAbsBox(Oracle):
    """max_i |x_i| on [-1, 1]^n; subgradient sign(x_j) e_j at the first maximizer."""

    def __init__(self, n: int = 2):
        n = int(n)
        if n < 1:
            raise InvalidConfig("n must be positive")
        self.id = "max-abs-box"
        self.n = n
        self.region = Box(-np.ones(n), np.ones(n))
        self.f_star = 0.0
        self.x_star = np.zeros(n)
        self.lipschitz_L = 1.0
        self.radius_R = math.sqrt(n)

    def values(self, X):
        return np.abs(X).max(axis=1)

    def subgradients(self, X):
        rows = np.arange(X.shape[0])
        j = np.argmax(np.abs(X), axis=1)
        G = np.zeros_like(X)
        G[rows, j] = np.where(X[rows, j] >= 0.0, 1.0, -1.0)
        return G, np.ones(X.shape[0], dtype=bool)

    def to_dict(self):
        return {"example": "max-abs-box", "n": self.n}


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian perturbation with total variance ``sigma**2``.

    ``sigma == 0`` is the noiseless oracle. The random stream is supplied by
    the caller so that each run owns its generator.
    """

    sigma: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidConfig("noise sigma must be nonnegative")

    @property
    def is_none(self) -> bool:
        return self.sigma == 0.0

    def perturb(self, g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.sigma == 0.0:
            return g
        return g + rng.normal(0.0, self.sigma / math.sqrt(g.shape[0]), size=g.shape[0])

    def to_dict(self):
        return {"type": "none"} if self.sigma == 0.0 else {"type": "gaussian", "sigma": self.sigma}


def stochastic_subgradient(oracle: Oracle, noise: NoiseModel, x, rng) -> SubgradientOutcome:
    out = oracle.subgradient(x)
    if isinstance(out, Undefined) or noise.is_none:
        return out
    return Available(noise.perturb(out.g, rng))


def noise_from_dict(d: Optional[dict]) -> NoiseModel:
    if not d or d.get("type", "none") == "none":
        return NoiseModel(0.0)
    if d["type"] == "gaussian":
        return NoiseModel(float(d["sigma"]))
    raise InvalidConfig(f"unknown noise type {d['type']!r}")


_SANITY = {"l1-box": L1Box, "max-abs-box": MaxAbsBox}


def sanity_instance(name: str, n: int = 2) -> Oracle:
    """Lipschitz test instances with x* = 0 strictly inside [-1, 1]^n."""
    try:
        return _SANITY[name](n)
    except KeyError:
        raise UnknownInstance(f"no sanity instance named {name!r}") from None


def oracle_from_dict(d: dict[str, Any]) -> Oracle:
    """Build an oracle from its JSON form, e.g. ``{"example": "e1", "k1": 2, "k2": 5, "r": 100}``."""
    kind = d.get("example")
    if kind == "e1":
        return EllipseSqrt(d.get("k1", 2.0), d.get("k2", 5.0), d.get("r", 100.0))
    if kind == "e2":
        return RenegarRatio()
    if kind == "e3":
        return NegEntropy(d.get("n", 10), d.get("B", 2.0))
    if kind in _SANITY:
        return sanity_instance(kind, d.get("n", 2))
    raise UnknownInstance(f"unknown oracle {kind!r}")
