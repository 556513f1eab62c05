"""Closed-form bounds, one-step PSG failure predicates and the Example 2 geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailure, InvalidConfig, MissingParameter, OutOfDomain, ZeroVector
from .sets import TAU_INT, Ellipse2D

# tag -> (parameters read from the spec, run statistics read from run_stats)
_REQUIRES: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "T3c1": (("R", "L", "c", "t"), ()),
    "T3c2": (("R", "L", "c", "t", "k"), ()),
    "T3c3": (("R", "L", "c", "t"), ()),
    "T3c4": (("R", "c", "t", "k"), ("max_gnorm",)),
    "T4c1": (("R", "L", "c", "t"), ()),
    "T4c2": (("R", "L", "c", "t"), ()),
    "T4c3": (("R", "L", "c", "t"), ()),
    "T4c4": (("R", "c", "t"), ("max_gnorm",)),
    "T5sc": (("c", "mu", "t"), ("max_gnorm",)),
    "T6c1": (("R", "L", "c", "t"), ()),
    "T6c2": (("R", "L", "c", "t", "k"), ()),
    "T6c3": (("R", "c", "t", "k"), ("max_gnorm",)),
    "T7c1": (("R", "L", "c", "t"), ()),
    "T7c2": (("R", "L", "c", "t"), ()),
    "T7c3": (("R", "c", "t"), ("max_gnorm",)),
    "T8sc": (("c", "mu", "t"), ("max_gnorm_sq",)),
}

BOUND_TAGS = tuple(_REQUIRES)


@dataclass(frozen=True)
class BoundSpec:
    tag: str
    R: Optional[float] = None
    L: Optional[float] = None
    c: Optional[float] = None
    mu: Optional[float] = None
    k: Optional[float] = None
    t: Optional[int] = None

    def __post_init__(self):
        if self.tag not in _REQUIRES:
            raise InvalidConfig(f"unknown bound tag {self.tag!r}")
        if self.c is not None and not 0.0 < self.c <= 1.0:
            raise InvalidConfig("beta floor c must lie in (0, 1]")
        if self.t is not None and int(self.t) < 1:
            raise InvalidConfig("t must be at least 1")
        if self.k is not None and self.k < -1:
            raise InvalidConfig("k must be at least -1")
        if self.tag == "T6c3" and self.k is not None and self.k < 0:
            raise InvalidConfig("T6c3 needs k >= 0")

    def to_dict(self) -> dict:
        return {k: v for k, v in (("tag", self.tag), ("R", self.R), ("L", self.L), ("c", self.c),
                                  ("mu", self.mu), ("k", self.k), ("t", self.t)) if v is not None}


def weight_family_factor(k: float, t: int) -> float:
    """(t^((k+1)/2) + sum s^((k-1)/2)) / (2 sum s^(k/2)), the shared prefactor of the power-weight bounds."""
    s = np.arange(1, int(t) + 1, dtype=float)
    return (t ** ((k + 1) / 2.0) + np.sum(s ** ((k - 1) / 2.0))) / (2.0 * np.sum(s ** (k / 2.0)))


def bound_value(spec: BoundSpec, run_stats: Optional[Mapping[str, float]] = None) -> float:
    """Right-hand side of the rate bound named by ``spec.tag``.

    ``run_stats`` supplies ``max_gnorm`` (and ``max_gnorm_sq`` for T8sc; in the
    stochastic tags these are batch means standing in for the expectations).
    """
    run_stats = dict(run_stats or {})
    names, stats = _REQUIRES[spec.tag]
    p = {}
    for n in names:
        v = getattr(spec, n)
        if v is None:
            raise MissingParameter(f"{spec.tag} needs parameter {n}")
        p[n] = float(v)
    for n in stats:
        if n not in run_stats and n == "max_gnorm_sq" and "max_gnorm" in run_stats:
            run_stats[n] = run_stats["max_gnorm"] ** 2
        if n not in run_stats:
            raise MissingParameter(f"{spec.tag} needs run statistic {n}")
    t = int(p["t"])
    rt = math.sqrt(t)
    tag = spec.tag
    if tag in ("T3c1", "T4c1", "T6c1", "T7c1"):
        return p["R"] * p["L"] / (p["c"] * rt)
    if tag in ("T3c2", "T6c2"):
        return weight_family_factor(p["k"], t) * p["R"] * p["L"] / p["c"]
    if tag in ("T3c3", "T4c3"):
        RL = p["R"] * p["L"]
        return (2.0 * RL + RL * math.log(t)) / (4.0 * p["c"] * (math.sqrt(t + 1) - 1.0))
    if tag in ("T3c4", "T6c3"):
        return weight_family_factor(p["k"], t) * p["R"] * run_stats["max_gnorm"] / p["c"]
    if tag in ("T4c2", "T7c2"):
        return 3.0 * p["R"] * p["L"] / (2.0 * p["c"] * rt)
    if tag in ("T4c4", "T7c3"):
        return 3.0 * p["R"] * run_stats["max_gnorm"] / (2.0 * p["c"] * rt)
    if tag == "T5sc":
        return 2.0 * run_stats["max_gnorm"] ** 2 / (p["c"] * p["mu"] * (t + 1))
    # T8sc
    return 2.0 * run_stats["max_gnorm_sq"] / (p["c"] * p["mu"] * (t + 1))


def master_bound(terms, R: float) -> float:
    """(R^2 w_t / (2 alpha_t beta_t) + sum w_s alpha_s ||g_s||^2 / 2) / sum w_s for one run."""
    if not terms.sum_w > 0:
        raise MissingParameter("bound terms are empty")
    return (R * R * terms.last_w_over_alphabeta / 2.0 + terms.sum_w_alpha_gsq / 2.0) / terms.sum_w


def growth_diagnostic(gnorms) -> float:
    """max_s ||g_s|| / sqrt(s); bounded values indicate growth within O(sqrt(s))."""
    g = np.asarray(gnorms, dtype=float)
    if g.size == 0:
        return 0.0
    return float(np.max(g / np.sqrt(np.arange(1, g.size + 1))))


# ----------------------------------------------------------------- Example 1


def e1_failure_lhs(r: float, c: float, theta: float, rho: float) -> float:
    sn2 = math.sin(theta) ** 2
    d = 1.0 + (rho - 1.0) * sn2
    return c + r * rho * (rho - 1.0) * sn2 / d - 2.0 * math.sqrt(r * c * d)


def e1_failure_predicate(r: float, c: float, theta: float, rho: float) -> bool:
    """True when the parameterized start makes the first PSG step leave the open ellipse."""
    if not (r > 0 and 0 < c < r and rho >= 1):
        raise InvalidConfig("need r > 0, 0 < c < r and rho >= 1")
    return e1_failure_lhs(r, c, theta, rho) >= 0.0


def e1_polar(k1: float, k2: float, x) -> tuple[float, float, float]:
    """Map a point of the ellipse to ``(c, theta, rho)`` with the long axis first."""
    x1, x2 = float(x[0]), float(x[1])
    if k1 > k2:
        k1, k2, x1, x2 = k2, k1, x2, x1
    c = k1 * x1 * x1 + k2 * x2 * x2
    theta = math.atan2(math.sqrt(k2) * x2, math.sqrt(k1) * x1)
    return c, theta, k2 / k1


def e1_point(k1: float, rho: float, c: float, theta: float) -> np.ndarray:
    return np.array([math.sqrt(c / k1) * math.cos(theta), math.sqrt(c / (rho * k1)) * math.sin(theta)])


def e1_one_step_fails(k1: float, k2: float, r: float, x) -> bool:
    """Directly simulate the first PSG step with alpha_1 = R / ||g_1|| and test whether it leaves int(X)."""
    region = Ellipse2D(k1, k2, r)
    x = np.asarray(x, dtype=float)
    slack = region.slack(x)
    if not slack > TAU_INT:
        raise OutOfDomain("start must be strictly inside the ellipse")
    root = math.sqrt(slack)
    g = np.array([k1 * x[0] / root, k2 * x[1] / root])
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return False
    R = math.sqrt(r / min(k1, k2))
    y = x - (R / gn) * g
    return not region.strictly_interior(y)


def e1_rho_threshold(r: float, eps: float, c_values=None, n_theta: int = 721,
                     rho_max: float = 1e8) -> float:
    """Smallest rho (to 1e-6 relative) from which the predicate holds on the whole scanned
    ``(c, theta)`` grid with ``theta`` in ``[eps, pi-eps] U [pi+eps, 2pi-eps]``."""
    if c_values is None:
        c_values = np.arange(1, int(math.ceil(r)))
    c = np.asarray(c_values, dtype=float)[:, None]
    th = np.linspace(eps, math.pi - eps, n_theta)
    # sin^2 is symmetric under theta -> theta + pi, so one half-circle covers both arcs
    sn2 = np.sin(th)[None, :] ** 2

    def all_true(rho):
        d = 1.0 + (rho - 1.0) * sn2
        return bool(np.all(c + r * rho * (rho - 1.0) * sn2 / d - 2.0 * np.sqrt(r * c * d) >= 0.0))

    lo, hi = 1.0, 2.0
    while not all_true(hi):
        lo, hi = hi, 2.0 * hi
        if hi > rho_max:
            raise BracketFailure("no rho threshold below rho_max")
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if all_true(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ----------------------------------------------------------------- Example 3


@dataclass(frozen=True)
class E3Failure:
    p_root: float
    prob: float


def e3_q(x: float, mu: float) -> float:
    return x - (1.0 + math.log(x)) / mu


def e3_failure_probability(B: float, n: int, mu: Optional[float] = None) -> E3Failure:
    """Root p of q(x) = x - (1 + ln x)/mu on (1/e, 1) and the one-step failure probability 1 - (p/B)^n."""
    if mu is None:
        mu = 1.0 / B
    if not (B > 1 and 0 < mu <= 1.0 / B and int(n) >= 1):
        raise InvalidConfig("need B > 1, 0 < mu <= 1/B and n >= 1")
    lo, hi = math.exp(-1.0), 1.0
    if not (e3_q(lo, mu) > 0 > e3_q(hi, mu)):
        raise BracketFailure("q does not change sign on (1/e, 1)")
    p = brentq(e3_q, lo, hi, args=(mu,), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return E3Failure(p, 1.0 - (p / B) ** int(n))


# ----------------------------------------------------------------- Example 2 geometry


def angle(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("angle needs two nonzero vectors")
    # 2 atan2(|a - b|, |a + b|) on unit vectors: exact at 0 and pi, where arccos loses half the digits
    a, b = u / nu, v / nv
    return min(math.pi, 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b))))


@dataclass(frozen=True)
class GeometryErrors:
    angle_identity_err: float
    descent_angle_err: float


def e2_gradient_norm_grad(x) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    return np.array([-2.0 * x2 * x2 / x1**3, 2.0 * x2 / x1**2])


def e2_geometry_check(x) -> GeometryErrors:
    """Residuals of  angle(x, e1) = angle(-g, -x)  and  angle(-g, grad||g||) = pi/2 + angle(x, e1)."""
    x = np.asarray(x, dtype=float)
    x1, x2 = float(x[0]), float(x[1])
    if not (0.0 < x1 <= 1.0 and -1.0 <= x2 <= 1.0 and x2 != 0.0):
        raise OutOfDomain("need 0 < x1 <= 1, |x2| <= 1 and x2 != 0")
    t = x2 / x1
    g = np.array([1.0 - t * t, 2.0 * t])
    a_xe = angle(x, np.array([1.0, 0.0]))
    return GeometryErrors(
        abs(a_xe - angle(-g, -x)),
        abs(angle(-g, e2_gradient_norm_grad(x)) - (math.pi / 2.0 + a_xe)),
    )
