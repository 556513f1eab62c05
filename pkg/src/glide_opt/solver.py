"""Projected subgradient (PSG) and subgradient gliding (SGM) iterations.

One step of SGM from an iterate ``x`` with subgradient ``g``::

    y = x - alpha * g
    z = Proj(y)
    x_next = (1 - beta) * x + beta * z

PSG is the same loop with ``beta == 1``. A run performs at most ``t`` updates,
needs a subgradient at ``x_1 .. x_t`` only, and tracks ``f`` on
``x_1 .. x_{t+1}``.
"""

from __future__ import annotations

import copy
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import EmptyRun, GlideOptError, InvalidConfig, PreconditionViolated
from .oracles import NoiseModel, Oracle
from .schedules import AlphaRule, BetaRule, ConstantW, One, SearchedSet, WeightRule
from .sets import TAU_INT, FeasibleRegion

log = logging.getLogger(__name__)

COMPLETED = "completed"
UNDEFINED = "subgradient-undefined"
EARLY_OPTIMAL = "early-optimal"

MAX_REJECTION_DRAWS = 100_000


@dataclass(frozen=True)
class Status:
    kind: str
    step: Optional[int] = None

    def __str__(self):
        if self.kind == COMPLETED:
            return "Completed"
        if self.kind == UNDEFINED:
            return f"SubgradientUndefinedAt({self.step})"
        return f"EarlyOptimal({self.step})"

    @property
    def ok(self) -> bool:
        return self.kind != UNDEFINED


@dataclass
class SolverConfig:
    method: str
    alpha_rule: AlphaRule
    beta_rule: BetaRule = field(default_factory=One)
    weight_rule: WeightRule = field(default_factory=ConstantW)
    max_iters: int = 100
    noise: NoiseModel = field(default_factory=NoiseModel)
    success_gap: Optional[float] = None
    record_trajectory: bool = False

    def __post_init__(self):
        self.method = str(self.method).lower()
        if self.method not in ("psg", "sgm"):
            raise InvalidConfig(f"method must be 'psg' or 'sgm', got {self.method!r}")
        if self.method == "psg":
            self.beta_rule = One()
        self.max_iters = int(self.max_iters)
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be at least 1")
        if self.success_gap is not None and not self.success_gap > 0:
            raise InvalidConfig("success_gap must be positive")

    @property
    def psg_equivalent(self) -> bool:
        """SGM configured with beta == 1 behaves exactly like PSG."""
        return isinstance(self.beta_rule, One)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha_rule.to_dict(),
            "beta": self.beta_rule.to_dict(),
            "weight": self.weight_rule.to_dict(),
            "max_iters": self.max_iters,
            "noise": self.noise.to_dict(),
            "success_gap": self.success_gap,
            "record_trajectory": self.record_trajectory,
        }


@dataclass
class BoundTerms:
    sum_w: float = 0.0
    sum_w_alpha_gsq: float = 0.0
    last_w_over_alphabeta: float = 0.0
    max_gnorm: float = 0.0
    sum_gnorm_sq: float = 0.0
    # extras for diagnostics: C1 along the run, smallest beta used, max ||g_s|| / sqrt(s)
    c1_holds: bool = True
    min_beta: float = 1.0
    max_growth: float = 0.0


@dataclass
class TrajectoryRow:
    s: int
    x: np.ndarray
    f: float
    gnorm: float
    alpha: float
    beta: float
    w: float


@dataclass
class RunRecord:
    status: Status
    iterations_done: int
    ergodic_point: Optional[np.ndarray]
    ergodic_gap: Optional[float]
    min_f: float
    min_f_step: int
    bound_terms: BoundTerms
    final_point: np.ndarray
    interior_violations: int = 0
    trajectory: Optional[list[TrajectoryRow]] = None

    def gap(self, f_star: float) -> float:
        return self.min_f - f_star

    def to_dict(self) -> dict:
        d = {
            "status": str(self.status),
            "status_kind": self.status.kind,
            "status_step": self.status.step,
            "iterations_done": self.iterations_done,
            "ergodic_point": None if self.ergodic_point is None else self.ergodic_point.tolist(),
            "ergodic_gap": self.ergodic_gap,
            "min_f": self.min_f,
            "min_f_step": self.min_f_step,
            "bound_terms": asdict(self.bound_terms),
            "final_point": self.final_point.tolist(),
            "interior_violations": self.interior_violations,
        }
        if self.trajectory is not None:
            d["trajectory"] = [
                {"s": r.s, "x": r.x.tolist(), "f": r.f, "gnorm": r.gnorm,
                 "alpha": r.alpha, "beta": r.beta, "w": r.w}
                for r in self.trajectory
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        traj = d.get("trajectory")
        return cls(
            status=Status(d["status_kind"], d["status_step"]),
            iterations_done=d["iterations_done"],
            ergodic_point=None if d["ergodic_point"] is None else np.array(d["ergodic_point"]),
            ergodic_gap=d["ergodic_gap"],
            min_f=d["min_f"],
            min_f_step=d["min_f_step"],
            bound_terms=BoundTerms(**d["bound_terms"]),
            final_point=np.array(d["final_point"]),
            interior_violations=d["interior_violations"],
            trajectory=None if traj is None else [
                TrajectoryRow(r["s"], np.array(r["x"]), r["f"], r["gnorm"], r["alpha"], r["beta"], r["w"])
                for r in traj
            ],
        )


@dataclass(frozen=True)
class TrialError:
    """A trial that raised instead of producing a record."""

    trial: int
    error: str
    message: str


def _check_start(region: FeasibleRegion, x, method: str) -> np.ndarray:
    x = np.array(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != region.dim:
        raise PreconditionViolated(f"x1 must be a point of dimension {region.dim}")
    if not np.all(np.isfinite(x)):
        raise PreconditionViolated("x1 must be finite")
    if method == "sgm" and not region.strictly_interior(x):
        raise PreconditionViolated("SGM needs a strictly interior starting point")
    if method == "psg" and not region.contains(x):
        raise PreconditionViolated("PSG needs a feasible starting point")
    return x


def run(
    oracle: Oracle,
    region: FeasibleRegion,
    x1,
    config: SolverConfig,
    rng: Optional[np.random.Generator] = None,
) -> RunRecord:
    x = _check_start(region, x1, config.method)
    oracle.evaluate(x)
    if not config.noise.is_none and rng is None:
        raise InvalidConfig("a noisy oracle needs a random generator")
    return _lockstep(oracle, region, x[None, :], config, [rng], catch=False)[0]


def _project(region, Y, rows, errors, catch):
    """Project rows of ``Y``; with ``catch`` a failing row is recorded instead of raising."""
    try:
        return region.project_rows(Y), np.ones(Y.shape[0], dtype=bool)
    except GlideOptError:
        if not catch:
            raise
    Z = Y.copy()
    ok = np.ones(Y.shape[0], dtype=bool)
    for j in range(Y.shape[0]):
        try:
            Z[j] = region.project_point(Y[j])
        except GlideOptError as exc:
            ok[j] = False
            errors[rows[j]] = exc
    return Z, ok


def _lockstep(oracle, region, X1, config, rngs, catch=True):
    """Advance ``m`` independent runs together, one row per run.

    Every operation is row-wise, so a row's result does not depend on which
    other rows share the batch.
    """
    X = np.array(X1, dtype=float)
    m = X.shape[0]
    t = config.max_iters
    alpha_rule = copy.deepcopy(config.alpha_rule)
    alpha_rule.start(m)
    beta_rule, weight_rule, noise = config.beta_rule, config.weight_rule, config.noise
    searched = isinstance(beta_rule, SearchedSet)
    joint = alpha_rule.needs_beta

    fx = oracle.values(X)
    min_f, min_step = fx.copy(), np.ones(m, dtype=int)
    sum_w = np.zeros(m)
    sum_wag = np.zeros(m)
    prev_ratio = np.full(m, -math.inf)
    max_g = np.zeros(m)
    sum_g2 = np.zeros(m)
    max_growth = np.zeros(m)
    min_beta = np.ones(m)
    c1 = np.ones(m, dtype=bool)
    num = np.zeros_like(X)
    viol = (~(region.slacks(X) > TAU_INT)).astype(int)
    done = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    status = [Status(COMPLETED)] * m
    early: dict[int, np.ndarray] = {}
    errors: dict[int, Exception] = {}
    traj = [[] for _ in range(m)] if config.record_trajectory else None

    def stop(idx, st):
        for i in idx:
            status[i] = st
            active[i] = False

    for s in range(1, t + 1):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        Xa = X[rows]
        G, ok = oracle.subgradients(Xa)
        if not noise.is_none:
            for j in np.flatnonzero(ok):
                G[j] = noise.perturb(G[j], rngs[rows[j]])
        stop(rows[~ok], Status(UNDEFINED, s))
        gn = np.sqrt(np.sum(G * G, axis=1))
        zero = ok & (gn == 0.0)
        for i in rows[zero]:
            early[i] = X[i].copy()
        stop(rows[zero], Status(EARLY_OPTIMAL, s))
        keep = ok & ~zero
        rows, Xa, G, gn = rows[keep], Xa[keep], G[keep], gn[keep]
        if rows.size == 0:
            continue

        good = np.ones(rows.size, dtype=bool)
        if searched:
            cands = beta_rule.candidates
            V = np.empty((rows.size, len(cands)))
            nexts = []
            if not joint:
                alpha = alpha_rule.alpha_rows(s, gn, 1.0, rows)
                Z, okz = _project(region, Xa - alpha[:, None] * G, rows, errors, catch)
                good &= okz
            for k, b in enumerate(cands):
                if joint:
                    a_b = alpha_rule.alpha_for_beta(s, b)
                    Z, okz = _project(region, Xa - a_b * G, rows, errors, catch)
                    good &= okz
                Xn_b = (1.0 - b) * Xa + b * Z
                nexts.append(Xn_b)
                V[:, k] = oracle.values(Xn_b)
            pick = np.argmin(V, axis=1)
            beta = np.asarray(cands)[pick]
            Xn = np.stack(nexts)[pick, np.arange(rows.size)]
            if joint:
                alpha = alpha_rule.alpha_rows(s, gn, beta, rows)
        else:
            b = beta_rule.beta_next(s)
            alpha = alpha_rule.alpha_rows(s, gn, b, rows)
            Z, good = _project(region, Xa - alpha[:, None] * G, rows, errors, catch)
            Xn = Z if b == 1.0 else (1.0 - b) * Xa + b * Z
            beta = np.full(rows.size, b)
        if not good.all():
            for i in rows[~good]:
                active[i] = False
            rows, Xa, G, gn, alpha, beta, Xn = (
                a[good] for a in (rows, Xa, G, gn, alpha, beta, Xn)
            )

        w = np.broadcast_to(np.asarray(weight_rule.weight_next(s, alpha, beta), dtype=float), alpha.shape)
        ratio = w / (alpha * beta)
        pr = prev_ratio[rows]
        c1[rows] &= ~(ratio < pr - 1e-12 * np.abs(pr))
        prev_ratio[rows] = ratio
        sum_w[rows] += w
        sum_wag[rows] += w * alpha * gn * gn
        sum_g2[rows] += gn * gn
        max_g[rows] = np.maximum(max_g[rows], gn)
        max_growth[rows] = np.maximum(max_growth[rows], gn / math.sqrt(s))
        min_beta[rows] = np.minimum(min_beta[rows], beta)
        num[rows] += w[:, None] * Xa
        if traj is not None:
            for j, i in enumerate(rows):
                traj[i].append(TrajectoryRow(s, Xa[j].copy(), float(fx[i]), float(gn[j]),
                                             float(alpha[j]), float(beta[j]), float(w[j])))

        X[rows] = Xn
        done[rows] = s
        viol[rows] += ~(region.slacks(Xn) > TAU_INT)
        f_new = oracle.values(Xn)
        fx[rows] = f_new
        better = f_new < min_f[rows]
        min_f[rows[better]] = f_new[better]
        min_step[rows[better]] = s + 1

    out: list[Union[RunRecord, TrialError]] = []
    for i in range(m):
        if i in errors:
            exc = errors[i]
            out.append(TrialError(-1, type(exc).__name__, str(exc)))
            continue
        ergodic = early.get(i)
        if ergodic is None and sum_w[i] > 0.0:
            ergodic = num[i] / sum_w[i]
        gap = None
        if ergodic is not None and oracle.f_star is not None:
            gap = float(oracle.values(ergodic[None, :])[0]) - oracle.f_star
        bt = BoundTerms(
            sum_w=float(sum_w[i]),
            sum_w_alpha_gsq=float(sum_wag[i]),
            last_w_over_alphabeta=0.0 if done[i] == 0 else float(prev_ratio[i]),
            max_gnorm=float(max_g[i]),
            sum_gnorm_sq=float(sum_g2[i]),
            c1_holds=bool(c1[i]),
            min_beta=float(min_beta[i]),
            max_growth=float(max_growth[i]),
        )
        out.append(RunRecord(
            status=status[i],
            iterations_done=int(done[i]),
            ergodic_point=ergodic,
            ergodic_gap=gap,
            min_f=float(min_f[i]),
            min_f_step=int(min_step[i]),
            bound_terms=bt,
            final_point=X[i].copy(),
            interior_violations=int(viol[i]),
            trajectory=None if traj is None else traj[i],
        ))
    return out


def ergodic_readout(record: RunRecord) -> np.ndarray:
    if record.ergodic_point is None:
        raise EmptyRun("no completed step to average")
    return record.ergodic_point


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """PCG64 stream for one trial, derived only from ``(master_seed, trial)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))))


def sample_interior(region: FeasibleRegion, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over the strict interior by rejection from the bounding box."""
    lo, hi = region.bounding_box()
    for _ in range(MAX_REJECTION_DRAWS):
        x = rng.uniform(lo, hi)
        if region.strictly_interior(x):
            return x
    raise InvalidConfig("rejection sampling failed to hit the interior")


def _chunk(args) -> list[Union[RunRecord, TrialError]]:
    oracle, region, config, master_seed, lo, hi = args
    rngs, starts, failed = [], [], {}
    for i in range(lo, hi):
        rng = trial_rng(master_seed, i)
        try:
            starts.append(sample_interior(region, rng))
            rngs.append(rng)
        except GlideOptError as exc:
            failed[i] = TrialError(i, type(exc).__name__, str(exc))
    recs = iter(_lockstep(oracle, region, np.array(starts).reshape(len(starts), region.dim), config, rngs)
                if starts else [])
    out = []
    for i in range(lo, hi):
        r = failed.get(i) or next(recs)
        if isinstance(r, TrialError):
            r = TrialError(i, r.error, r.message)
            log.warning("trial %d failed: %s: %s", i, r.error, r.message)
        out.append(r)
    return out


def run_batch(
    oracle: Oracle,
    region: FeasibleRegion,
    config: SolverConfig,
    n_trials: int,
    master_seed: int,
    workers: int = 1,
    chunk_size: int = 1000,
) -> list[Union[RunRecord, TrialError]]:
    """Independent trials from uniform interior starts.

    Trial ``i`` draws its start and its noise from ``trial_rng(master_seed, i)``;
    the records do not depend on ``workers`` or ``chunk_size``.
    """
    n_trials = int(n_trials)
    if n_trials < 1:
        raise InvalidConfig("n_trials must be at least 1")
    chunk_size = max(1, int(chunk_size))
    jobs = [(oracle, region, config, master_seed, lo, min(lo + chunk_size, n_trials))
            for lo in range(0, n_trials, chunk_size)]
    if workers <= 1:
        parts = [_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    return [r for part in parts for r in part]


CSV_COLUMNS = ("trial", "status", "iterations_done", "min_f", "ergodic_gap", "max_gnorm", "interior_violations")


def fmt_float(v: Optional[float]) -> str:
    return "" if v is None else format(float(v), ".17g")


def batch_to_csv(results: Sequence[Union[RunRecord, TrialError]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, r in enumerate(results):
        if isinstance(r, TrialError):
            w.writerow([i, f"Error({r.error})", "", "", "", "", ""])
            continue
        w.writerow([
            i, str(r.status), r.iterations_done, fmt_float(r.min_f), fmt_float(r.ergodic_gap),
            fmt_float(r.bound_terms.max_gnorm), r.interior_violations,
        ])
    return buf.getvalue()


def config_from_dict(d: dict[str, Any], oracle: Optional[Oracle] = None) -> SolverConfig:
    """Build a solver config; R, L and mu missing from the alpha rule come from ``oracle``."""
    from .oracles import noise_from_dict
    from .schedules import alpha_from_dict, beta_from_dict, weight_from_dict

    defaults: dict[str, Any] = {}
    if oracle is not None:
        defaults["R"] = oracle.radius_R
        if oracle.lipschitz_L is not None:
            defaults["L"] = oracle.lipschitz_L
        if oracle.strong_mu is not None:
            defaults["mu"] = oracle.strong_mu
    t = int(d.get("max_iters", 100))
    defaults.setdefault("t", t)
    noise = noise_from_dict(d.get("noise"))
    if "L" in defaults and not noise.is_none:
        # second-moment bound of the noisy oracle
        defaults["L"] = math.sqrt(defaults["L"] ** 2 + noise.sigma ** 2)
    try:
        return SolverConfig(
            method=d["method"],
            alpha_rule=alpha_from_dict(d["alpha"], defaults),
            beta_rule=beta_from_dict(d.get("beta", {"type": "constant", "value": 0.5})),
            weight_rule=weight_from_dict(d.get("weight", {"type": "constant"})),
            max_iters=t,
            noise=noise,
            success_gap=d.get("success_gap"),
            record_trajectory=bool(d.get("record_trajectory", False)),
        )
    except KeyError as exc:
        raise InvalidConfig(f"solver config is missing {exc}") from None
