"""Subgradient step sizes (alpha), gliding step sizes (beta) and ergodic weights.

Alpha rules may carry state (the running maximum of :class:`AdaptiveG`), so a
rule instance belongs to a single run; the solver deep-copies the configured
prototype before iterating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidConfig, MissingEvaluator, ZeroSubgradient


# --------------------------------------------------------------------------- alpha


class AlphaRule:
    #: True when the step size is a function of the gliding step size
    needs_beta = False

    def alpha_next(self, s: int, g_norm: float, beta: float = 1.0) -> float:
        raise NotImplementedError

    def alpha_for_beta(self, s: int, beta: float) -> float:
        """Stateless evaluation used by the beta search; only for ``needs_beta`` rules."""
        raise NotImplementedError

    def start(self, m: int) -> None:
        """Reset per-row state before advancing ``m`` runs in lockstep."""

    def alpha_rows(self, s: int, gn: np.ndarray, beta, rows: np.ndarray) -> np.ndarray:
        """Row-wise ``alpha_next``: ``gn`` and ``beta`` belong to the runs listed in ``rows``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class ConstantHorizon(AlphaRule):
    """alpha_s = R / (L sqrt(t)) for a horizon t fixed before the run."""

    R: float
    L: float
    t_total: int

    def __post_init__(self):
        if int(self.t_total) < 1:
            raise InvalidConfig("constant-horizon step needs t_total >= 1")
        self._alpha = self.R / (self.L * math.sqrt(self.t_total))

    def alpha_next(self, s, g_norm, beta=1.0):
        return self._alpha

    def alpha_rows(self, s, gn, beta, rows):
        return np.full(gn.shape[0], self._alpha)

    def to_dict(self):
        return {"type": "constant-horizon", "R": self.R, "L": self.L, "t": self.t_total}


@dataclass
class DecayingRL(AlphaRule):
    R: float
    L: float

    def alpha_next(self, s, g_norm, beta=1.0):
        return self.R / (self.L * math.sqrt(s))

    def alpha_rows(self, s, gn, beta, rows):
        return np.full(gn.shape[0], self.R / (self.L * math.sqrt(s)))

    def to_dict(self):
        return {"type": "decaying", "R": self.R, "L": self.L}


@dataclass
class Normalized(AlphaRule):
    """alpha_s = R / (||g_s|| sqrt(s))."""

    R: float

    def alpha_next(self, s, g_norm, beta=1.0):
        if g_norm == 0.0:
            raise ZeroSubgradient(f"zero subgradient at step {s}")
        return self.R / (g_norm * math.sqrt(s))

    def alpha_rows(self, s, gn, beta, rows):
        if (gn == 0.0).any():
            raise ZeroSubgradient(f"zero subgradient at step {s}")
        return self.R / (gn * math.sqrt(s))

    def to_dict(self):
        return {"type": "normalized", "R": self.R}


@dataclass
class AdaptiveG(AlphaRule):
    """alpha_s = R / (G_s s^(a/2)) with G_s = max(G_{s-1}, ||g_s|| s^((1-a)/2)), G_0 = -inf.

    Each call advances the running maximum exactly once.
    """

    R: float
    a: float = 1.0
    G: float = field(default=-math.inf, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise InvalidConfig("adaptive-g exponent a must lie in [0, 1]")

    def alpha_next(self, s, g_norm, beta=1.0):
        if g_norm == 0.0:
            raise ZeroSubgradient(f"zero subgradient at step {s}")
        cand = g_norm * s ** ((1.0 - self.a) / 2.0)
        if cand > self.G:
            self.G = cand
        return self.R / (self.G * s ** (self.a / 2.0))

    def start(self, m):
        self.G_rows = np.full(m, -math.inf)

    def alpha_rows(self, s, gn, beta, rows):
        if (gn == 0.0).any():
            raise ZeroSubgradient(f"zero subgradient at step {s}")
        G = np.maximum(self.G_rows[rows], gn * s ** ((1.0 - self.a) / 2.0))
        self.G_rows[rows] = G
        return self.R / (G * s ** (self.a / 2.0))

    def to_dict(self):
        return {"type": "adaptive-g", "R": self.R, "a": self.a}


@dataclass
class StronglyConvexJoint(AlphaRule):
    """alpha_s = 2 / (mu (s+1) beta_s), so that alpha_s * beta_s = 2 / (mu (s+1))."""

    mu: float
    needs_beta = True

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidConfig("strong convexity modulus must be positive")

    def alpha_next(self, s, g_norm, beta=1.0):
        return 2.0 / (self.mu * (s + 1) * beta)

    def alpha_for_beta(self, s, beta):
        return 2.0 / (self.mu * (s + 1) * beta)

    def alpha_rows(self, s, gn, beta, rows):
        return np.broadcast_to(2.0 / (self.mu * (s + 1) * np.asarray(beta, dtype=float)), gn.shape).copy()

    def to_dict(self):
        return {"type": "strongly-convex", "mu": self.mu}


# --------------------------------------------------------------------------- beta


class BetaRule:
    floor_c: float

    def beta_next(self, s: int, evaluator: Optional[Callable[[float], float]] = None) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class One(BetaRule):
    """beta_s = 1: plain projected subgradient steps."""

    floor_c = 1.0

    def beta_next(self, s, evaluator=None):
        return 1.0

    def to_dict(self):
        return {"type": "one"}


@dataclass(frozen=True)
class Constant(BetaRule):
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise InvalidConfig("constant gliding step must lie in (0, 1)")

    @property
    def floor_c(self):
        return self.beta

    def beta_next(self, s, evaluator=None):
        return self.beta

    def to_dict(self):
        return {"type": "constant", "value": self.beta}


@dataclass(frozen=True)
class SearchedSet(BetaRule):
    """Pick, per step, the candidate whose next iterate has the smallest objective.

    Ties go to the smallest candidate.
    """

    candidates: tuple = (0.1, 0.5, 0.9)

    def __post_init__(self):
        cands = tuple(sorted(float(b) for b in self.candidates))
        if not cands or not all(0.0 < b < 1.0 for b in cands):
            raise InvalidConfig("searched gliding steps must lie in (0, 1)")
        object.__setattr__(self, "candidates", cands)

    @property
    def floor_c(self):
        return self.candidates[0]

    def beta_next(self, s, evaluator=None):
        if evaluator is None:
            raise MissingEvaluator("a searched gliding step needs a candidate evaluator")
        best_b, best_v = self.candidates[0], math.inf
        for b in self.candidates:
            v = evaluator(b)
            # strict comparison keeps the smallest beta on ties
            if v < best_v:
                best_b, best_v = b, v
        return best_b

    def select_rows(self, V: np.ndarray) -> np.ndarray:
        """Per-row choice from a ``(m, len(candidates))`` value matrix, ties to the smallest beta."""
        return np.asarray(self.candidates)[np.argmin(V, axis=1)]

    def to_dict(self):
        return {"type": "searched", "candidates": list(self.candidates)}


# --------------------------------------------------------------------------- weights


class WeightRule:
    def weight_next(self, s: int, alpha: float, beta: float) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantW(WeightRule):
    def weight_next(self, s, alpha, beta):
        return 1.0

    def to_dict(self):
        return {"type": "constant"}


@dataclass(frozen=True)
class PowerK(WeightRule):
    """w_s = s^(k/2)."""

    k: float

    def __post_init__(self):
        if self.k < -1:
            raise InvalidConfig("power-k weights need k >= -1")

    def weight_next(self, s, alpha, beta):
        return s ** (self.k / 2.0)

    def to_dict(self):
        return {"type": "power-k", "k": self.k}


@dataclass(frozen=True)
class InverseAlphaK(WeightRule):
    """w_s = 1 / alpha_s^k for k in [-1, 0]."""

    k: float

    def __post_init__(self):
        if not -1.0 <= self.k <= 0.0:
            raise InvalidConfig("inverse-alpha-k weights need k in [-1, 0]")

    def weight_next(self, s, alpha, beta):
        return alpha ** (-self.k)

    def to_dict(self):
        return {"type": "inverse-alpha-k", "k": self.k}


@dataclass(frozen=True)
class AlphaW(WeightRule):
    def weight_next(self, s, alpha, beta):
        return alpha

    def to_dict(self):
        return {"type": "alpha"}


@dataclass(frozen=True)
class BetaW(WeightRule):
    def weight_next(self, s, alpha, beta):
        return beta

    def to_dict(self):
        return {"type": "beta"}


@dataclass(frozen=True)
class AlphaBetaW(WeightRule):
    def weight_next(self, s, alpha, beta):
        return alpha * beta

    def to_dict(self):
        return {"type": "alpha-beta"}


@dataclass(frozen=True)
class StronglyConvexLinear(WeightRule):
    """Unnormalized w_s = s; dividing by the running sum gives 2s / (t(t+1))."""

    def weight_next(self, s, alpha, beta):
        return float(s)

    def to_dict(self):
        return {"type": "linear"}


def family_weight(k: float) -> WeightRule:
    """The two-branch weight family: 1/alpha^k for -1 <= k <= 0, s^(k/2) for k > 0."""
    return InverseAlphaK(k) if k <= 0 else PowerK(k)


def check_C1(history: Sequence[tuple[float, float, float]], rtol: float = 1e-12) -> bool:
    """True iff w_s / (alpha_s beta_s) is nondecreasing over ``(w, alpha, beta)`` triples."""
    prev = -math.inf
    for w, a, b in history:
        ratio = w / (a * b)
        if ratio < prev - rtol * abs(prev):
            return False
        prev = ratio
    return True


# --------------------------------------------------------------------------- json


def alpha_from_dict(d: dict, defaults: Optional[dict] = None) -> AlphaRule:
    """Parse an alpha rule; missing R / L / mu fall back to ``defaults``."""
    d = {**(defaults or {}), **{k: v for k, v in d.items() if v is not None}}
    kind = d.get("type")
    try:
        if kind == "constant-horizon":
            return ConstantHorizon(float(d["R"]), float(d["L"]), int(d["t"]))
        if kind == "decaying":
            return DecayingRL(float(d["R"]), float(d["L"]))
        if kind == "normalized":
            return Normalized(float(d["R"]))
        if kind == "adaptive-g":
            return AdaptiveG(float(d["R"]), float(d.get("a", 1.0)))
        if kind == "strongly-convex":
            return StronglyConvexJoint(float(d["mu"]))
    except KeyError as exc:
        raise InvalidConfig(f"alpha rule {kind!r} is missing {exc}") from None
    raise InvalidConfig(f"unknown alpha rule {kind!r}")


def beta_from_dict(d: dict) -> BetaRule:
    kind = d.get("type")
    if kind == "one":
        return One()
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "searched":
        return SearchedSet(tuple(d.get("candidates", (0.1, 0.5, 0.9))))
    raise InvalidConfig(f"unknown beta rule {kind!r}")


def weight_from_dict(d: dict) -> WeightRule:
    kind = d.get("type")
    simple = {
        "constant": ConstantW,
        "alpha": AlphaW,
        "beta": BetaW,
        "alpha-beta": AlphaBetaW,
        "linear": StronglyConvexLinear,
    }
    if kind in simple:
        return simple[kind]()
    if kind == "power-k":
        return PowerK(float(d["k"]))
    if kind == "inverse-alpha-k":
        return InverseAlphaK(float(d["k"]))
    if kind == "family":
        return family_weight(float(d["k"]))
    raise InvalidConfig(f"unknown weight rule {kind!r}")
