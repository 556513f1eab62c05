"""Seeded experiments: success-rate tables, failure maps, trajectories and bound checks.

Every random quantity of trial ``i`` comes from ``trial_rng(master_seed, i)``
(PCG64 seeded through ``SeedSequence(master_seed, spawn_key=(i,))``), so
reports are byte-identical for a fixed experiment regardless of worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from . import analysis
from .errors import InvalidConfig
from .oracles import EllipseSqrt, NegEntropy, Oracle, oracle_from_dict
from .schedules import (
    Constant,
    ConstantW,
    InverseAlphaK,
    PowerK,
    SearchedSet,
    StronglyConvexJoint,
    StronglyConvexLinear,
)
from .sets import region_from_dict
from .solver import (
    COMPLETED,
    EARLY_OPTIMAL,
    RunRecord,
    SolverConfig,
    TrialError,
    config_from_dict,
    fmt_float,
    run,
    run_batch,
    trial_rng,
    sample_interior,
)

log = logging.getLogger(__name__)

CONFIG_NAMES = ("table1", "table2", "table3")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class Variant:
    label: str
    solver: dict


@dataclass
class ExperimentSpec:
    """One oracle family, several solver variants, an optional parameter sweep.

    ``sweep`` maps oracle parameters to value lists; cells are their cartesian
    product in the listed order. ``max_iters`` and ``gap_threshold`` form the
    success rule: a trial succeeds when it ends without a missing subgradient
    and ``min_f - f* <= gap_threshold`` (the gap test is skipped when the
    threshold is None).
    """

    name: str
    oracle: dict
    variants: list[Variant]
    n_trials: int
    master_seed: int
    max_iters: int
    gap_threshold: Optional[float] = None
    sweep: dict[str, list] = field(default_factory=dict)
    region: Optional[dict] = None
    reference: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n_trials) < 1 or int(self.max_iters) < 1:
            raise InvalidConfig("n_trials and max_iters must be positive")
        if not self.variants:
            raise InvalidConfig("an experiment needs at least one variant")
        if self.gap_threshold is not None and not self.gap_threshold > 0:
            raise InvalidConfig("gap_threshold must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        try:
            succ = d.get("success", {})
            return cls(
                name=d["name"],
                oracle=d["oracle"],
                variants=[Variant(v["label"], v["solver"]) for v in d["variants"]],
                n_trials=int(d["n_trials"]),
                master_seed=int(d["master_seed"]),
                max_iters=int(succ.get("max_iters", d.get("max_iters", 100))),
                gap_threshold=succ.get("gap_threshold"),
                sweep=d.get("sweep", {}),
                region=d.get("region"),
                reference=d.get("reference", {}),
            )
        except KeyError as exc:
            raise InvalidConfig(f"experiment spec is missing {exc}") from None

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "oracle": self.oracle,
            "variants": [{"label": v.label, "solver": v.solver} for v in self.variants],
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "success": {"max_iters": self.max_iters, "gap_threshold": self.gap_threshold},
            "sweep": self.sweep,
        }
        if self.region is not None:
            d["region"] = self.region
        if self.reference:
            d["reference"] = self.reference
        return d

    def spec_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    def cells(self) -> list[dict]:
        keys = list(self.sweep)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.sweep[k] for k in keys))]

    def build(self, cell: dict, variant: Variant):
        oracle = oracle_from_dict({**self.oracle, **cell})
        region = oracle.region if self.region is None else region_from_dict(self.region)
        solver = {**variant.solver, "max_iters": self.max_iters}
        return oracle, region, config_from_dict(solver, oracle)


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    with open(path) as fh:
        return ExperimentSpec.from_dict(json.load(fh))


def bundled_spec(name: str) -> ExperimentSpec:
    """One of the checked-in experiment configs (``table1``, ``table2``, ``table3``)."""
    if name not in CONFIG_NAMES:
        raise InvalidConfig(f"no bundled config {name!r}")
    text = resources.files("glide_opt").joinpath("configs", f"{name}.json").read_text()
    return ExperimentSpec.from_dict(json.loads(text))


@dataclass
class CellResult:
    params: dict
    variant: str
    method: str
    n_trials: int
    n_success: int
    n_completed: int
    n_errors: int
    mean_min_f: float
    mean_iterations: float
    max_interior_violations: int

    @property
    def rate(self) -> float:
        return self.n_success / self.n_trials

    @property
    def stderr(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.n_trials)

    @property
    def completion_rate(self) -> float:
        return self.n_completed / self.n_trials

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "variant": self.variant,
            "method": self.method,
            "n_trials": self.n_trials,
            "n_success": self.n_success,
            "rate": self.rate,
            "stderr": self.stderr,
            "n_completed": self.n_completed,
            "completion_rate": self.completion_rate,
            "n_errors": self.n_errors,
            "mean_min_f": self.mean_min_f,
            "mean_iterations": self.mean_iterations,
            "max_interior_violations": self.max_interior_violations,
        }


@dataclass
class SuccessRateReport:
    name: str
    cells: list[CellResult]
    seed: int
    spec_hash: str
    wall_time: float = 0.0

    def cell(self, variant: str, **params) -> CellResult:
        for c in self.cells:
            if c.variant == variant and all(c.params.get(k) == v for k, v in params.items()):
                return c
        raise KeyError((variant, params))

    def to_dict(self) -> dict:
        # wall time is kept out so that reports of identical runs are byte-identical
        return {
            "name": self.name,
            "metadata": {"seed": self.seed, "spec_hash": self.spec_hash},
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        keys = sorted({k for c in self.cells for k in c.params})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*keys, "variant", "method", "n_trials", "n_success", "rate", "stderr",
                    "completion_rate", "mean_min_f", "mean_iterations", "max_interior_violations"])
        for c in self.cells:
            w.writerow([*(c.params.get(k, "") for k in keys), c.variant, c.method, c.n_trials,
                        c.n_success, fmt_float(c.rate), fmt_float(c.stderr), fmt_float(c.completion_rate),
                        fmt_float(c.mean_min_f), fmt_float(c.mean_iterations), c.max_interior_violations])
        return buf.getvalue()

    def write(self, out_dir: Union[str, Path], stem: Optional[str] = None) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name
        paths = [out / f"{stem}.json", out / f"{stem}.csv", out / f"{stem}.timing.json"]
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.to_csv())
        paths[2].write_text(json.dumps({"wall_time_s": self.wall_time}) + "\n")
        return paths


def is_success(rec: Union[RunRecord, TrialError], f_star: Optional[float], gap: Optional[float]) -> bool:
    if isinstance(rec, TrialError):
        return False
    if rec.status.kind not in (COMPLETED, EARLY_OPTIMAL):
        return False
    if gap is None:
        return True
    if f_star is None:
        raise InvalidConfig("a gap threshold needs an oracle with known optimal value")
    return rec.min_f - f_star <= gap


def summarize(params: dict, variant: str, method: str, results, f_star, gap) -> CellResult:
    recs = [r for r in results if isinstance(r, RunRecord)]
    return CellResult(
        params=params,
        variant=variant,
        method=method,
        n_trials=len(results),
        n_success=sum(is_success(r, f_star, gap) for r in results),
        n_completed=sum(r.status.kind in (COMPLETED, EARLY_OPTIMAL) for r in recs),
        n_errors=len(results) - len(recs),
        mean_min_f=float(np.mean([r.min_f for r in recs])) if recs else math.nan,
        mean_iterations=float(np.mean([r.iterations_done for r in recs])) if recs else math.nan,
        max_interior_violations=max((r.interior_violations for r in recs), default=0),
    )


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> SuccessRateReport:
    t0 = time.perf_counter()
    cells = []
    for cell in spec.cells():
        for v in spec.variants:
            oracle, region, cfg = spec.build(cell, v)
            results = run_batch(oracle, region, cfg, spec.n_trials, spec.master_seed, workers=workers)
            for r in results:
                if isinstance(r, TrialError):
                    log.warning("%s %s %s: trial %d raised %s", spec.name, cell, v.label, r.trial, r.error)
            cells.append(summarize(cell, v.label, cfg.method, results, oracle.f_star, spec.gap_threshold))
    return SuccessRateReport(spec.name, cells, spec.master_seed, spec.spec_hash(), time.perf_counter() - t0)


# ------------------------------------------------------------------ per-case runs


TABLE2_CASES = (10000, 10000, 100, 1000, 1000)


@dataclass
class Table2Row:
    case: int
    step: str
    method: str
    preset: int
    actual: int
    failing_step: Optional[int]
    min_f: float
    success: bool


def table2(spec: ExperimentSpec, cases=TABLE2_CASES) -> list[Table2Row]:
    """One seeded start per case, shared by every variant; success judged as in run_experiment."""
    rows = []
    for case, preset in enumerate(cases, start=1):
        for v in spec.variants:
            oracle = oracle_from_dict(spec.oracle)
            cfg = config_from_dict({**v.solver, "max_iters": preset}, oracle)
            rng = trial_rng(spec.master_seed, case)
            x1 = sample_interior(oracle.region, rng)
            rec = run(oracle, oracle.region, x1, cfg, rng)
            step = v.solver["alpha"]["type"]
            rows.append(Table2Row(case, step, cfg.method, preset, rec.iterations_done, rec.status.step
                                  if rec.status.kind != COMPLETED else None, rec.min_f,
                                  is_success(rec, oracle.f_star, spec.gap_threshold)))
    return rows


def table2_csv(rows: list[Table2Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "step", "method", "preset_iters", "actual_iters", "failing_step", "min_f", "result"])
    for r in rows:
        w.writerow([r.case, r.step, r.method, r.preset, r.actual, "" if r.failing_step is None else r.failing_step,
                    fmt_float(r.min_f), "succeed" if r.success else "fail"])
    return buf.getvalue()


# ------------------------------------------------------------------ failure map


@dataclass
class FailureMapSummary:
    rho: float
    n_cells: int
    n_fail: int
    n_agree: int

    @property
    def fail_fraction(self) -> float:
        return self.n_fail / self.n_cells

    @property
    def agreement(self) -> float:
        return self.n_agree / self.n_cells


def failure_region_map(rho_list, grid: int = 200, k1: float = 2.0, r: float = 100.0):
    """Grid of strictly interior starts of the ellipse with ``k2 = rho * k1``.

    Each row carries the directly simulated one-step failure and the analytic
    predicate. Returns ``(rows, summaries)``.
    """
    rows, summaries = [], []
    for rho in rho_list:
        rho = float(rho)
        k2 = rho * k1
        oracle = EllipseSqrt(k1, k2, r)
        lo, hi = oracle.region.bounding_box()
        xs = np.linspace(lo[0], hi[0], grid)
        ys = np.linspace(lo[1], hi[1], grid)
        n = fails = agree = 0
        for x in xs:
            for y in ys:
                p = np.array([x, y])
                if not oracle.region.strictly_interior(p):
                    continue
                c, theta, rh = analysis.e1_polar(k1, k2, p)
                if c == 0.0:
                    continue
                sim = analysis.e1_one_step_fails(k1, k2, r, p)
                pred = analysis.e1_failure_predicate(r, c, theta, rh)
                rows.append((rho, float(x), float(y), sim, pred))
                n += 1
                fails += sim
                agree += sim == pred
        summaries.append(FailureMapSummary(rho, n, fails, agree))
    return rows, summaries


def failure_map_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "x1", "x2", "one_step_fail", "predicate"])
    for rho, x, y, sim, pred in rows:
        w.writerow([fmt_float(rho), fmt_float(x), fmt_float(y), int(sim), int(pred)])
    return buf.getvalue()


# ------------------------------------------------------------------ trajectories


def trajectory_dump(oracle: Oracle, config: SolverConfig, x1, rng=None, region=None):
    """Run with trajectory recording; returns ``(record, csv_text)``."""
    region = oracle.region if region is None else region
    cfg = SolverConfig(config.method, config.alpha_rule, config.beta_rule, config.weight_rule,
                       config.max_iters, config.noise, config.success_gap, True)
    rec = run(oracle, region, x1, cfg, rng)
    n = region.dim
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", *(f"x{i + 1}" for i in range(n)), "f", "gnorm", "alpha", "beta"])
    for row in rec.trajectory:
        w.writerow([row.s, *(fmt_float(v) for v in row.x), fmt_float(row.f), fmt_float(row.gnorm),
                    fmt_float(row.alpha), fmt_float(row.beta)])
    return rec, buf.getvalue()


def to_db(gap: float) -> float:
    return 10.0 * math.log10(gap) if gap > 0 else -math.inf


def adaptive_beta_comparison(n: int = 10000, B: float = 2.0, t: int = 10, seed: int = 0,
                             betas=(0.1, 0.5, 0.9)):
    """Per-step dB gaps of SGM with fixed betas, the searched beta and PSG from one shared start.

    Returns ``(records, csv_text)`` where ``records`` maps method labels to run records.
    """
    oracle = NegEntropy(n, B)
    mu = oracle.strong_mu
    rng = trial_rng(seed, 0)
    x1 = sample_interior(oracle.region, rng)
    variants = {f"sgm-beta-{b}": Constant(b) for b in betas}
    variants["sgm-searched"] = SearchedSet(tuple(betas))
    records = {}
    for label, beta in variants.items():
        cfg = SolverConfig("sgm", StronglyConvexJoint(mu), beta, StronglyConvexLinear(), t, record_trajectory=True)
        records[label] = run(oracle, oracle.region, x1, cfg)
    cfg = SolverConfig("psg", StronglyConvexJoint(mu), weight_rule=StronglyConvexLinear(), max_iters=t,
                       record_trajectory=True)
    records["psg"] = run(oracle, oracle.region, x1, cfg)

    def gaps(rec):
        g = [row.f - oracle.f_star for row in rec.trajectory]
        if rec.iterations_done == t:
            g.append(oracle.evaluate(rec.final_point) - oracle.f_star)
        return g

    series = {k: gaps(r) for k, r in records.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", *(f"gap_db_{k}" for k in series)])
    for s in range(1, t + 2):
        w.writerow([s, *(fmt_float(to_db(v[s - 1])) if s <= len(v) else "" for v in series.values())])
    return records, buf.getvalue()


# ------------------------------------------------------------------ one-step failure frequency


def e3_one_step_failure_frequency(B: float, n: int, n_trials: int, seed: int) -> float:
    """Fraction of uniform starts for which PSG with alpha_s = 2/(mu(s+1)), mu = 1/B,
    hits a missing subgradient at step 2."""
    oracle = NegEntropy(n, B)
    cfg = SolverConfig("psg", StronglyConvexJoint(oracle.strong_mu), max_iters=2)
    res = run_batch(oracle, oracle.region, cfg, n_trials, seed)
    return sum(isinstance(r, RunRecord) and r.status.step == 2 for r in res) / n_trials


# ------------------------------------------------------------------ bound checks


STOCHASTIC_TAGS = ("T6c1", "T6c2", "T6c3", "T7c1", "T7c2", "T7c3", "T8sc")


def bound_spec_for(tag: str, oracle: Oracle, cfg: SolverConfig) -> analysis.BoundSpec:
    """Collect the bound parameters from the oracle metadata and the solver rules."""
    a, w = cfg.alpha_rule, cfg.weight_rule
    R = getattr(a, "R", oracle.radius_R)
    L = getattr(a, "L", None)
    if L is None and oracle.lipschitz_L is not None:
        L = math.sqrt(oracle.lipschitz_L ** 2 + cfg.noise.sigma ** 2)
    mu = getattr(a, "mu", oracle.strong_mu)
    # constant weights are the k = 0 member of both weight families
    k = w.k if isinstance(w, (PowerK, InverseAlphaK)) else (0.0 if isinstance(w, ConstantW) else None)
    return analysis.BoundSpec(tag, R=R, L=L, c=cfg.beta_rule.floor_c, mu=mu, k=k, t=cfg.max_iters)


def bound_check(spec: ExperimentSpec, tag: str, workers: int = 1) -> list[dict]:
    """Rows ``{tag, params, bound, empirical_gap, satisfied}``.

    Deterministic tags give one row per trial (bound from that run's max ||g||);
    stochastic tags give one row per cell comparing the mean ergodic gap with
    the bound evaluated at the batch means of max ||g~|| and max ||g~||^2.
    """
    if tag not in analysis.BOUND_TAGS:
        raise InvalidConfig(f"unknown bound tag {tag!r}")
    rows = []
    for cell in spec.cells():
        for v in spec.variants:
            oracle, region, cfg = spec.build(cell, v)
            bspec = bound_spec_for(tag, oracle, cfg)
            results = run_batch(oracle, region, cfg, spec.n_trials, spec.master_seed, workers=workers)
            recs = [r for r in results if isinstance(r, RunRecord) and r.ergodic_gap is not None]
            params = {**cell, "variant": v.label, **bspec.to_dict()}
            if tag in STOCHASTIC_TAGS:
                g = np.array([r.bound_terms.max_gnorm for r in recs])
                b = analysis.bound_value(bspec, {"max_gnorm": float(g.mean()), "max_gnorm_sq": float((g * g).mean())})
                gap = float(np.mean([r.ergodic_gap for r in recs]))
                rows.append({"tag": tag, "params": params, "bound": b, "empirical_gap": gap,
                             "satisfied": bool(gap <= b and len(recs) == len(results))})
                continue
            for i, r in enumerate(results):
                if not isinstance(r, RunRecord) or r.ergodic_gap is None:
                    rows.append({"tag": tag, "params": {**params, "trial": i}, "bound": None,
                                 "empirical_gap": None, "satisfied": False})
                    continue
                b = analysis.bound_value(bspec, {"max_gnorm": r.bound_terms.max_gnorm})
                rows.append({"tag": tag, "params": {**params, "trial": i}, "bound": b,
                             "empirical_gap": r.ergodic_gap, "satisfied": bool(r.ergodic_gap <= b)})
    return rows
