"""Command-line entry point ``glide-opt``.

Exit codes: 0 on success, 2 on a precondition or configuration error,
3 on an internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import GlideOptError, InvalidConfig
from .oracles import oracle_from_dict
from .sets import region_from_dict
from .solver import config_from_dict, run

SEED_ENV = "GLIDE_OPT_SEED"


def _seed_override():
    v = os.environ.get(SEED_ENV)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise InvalidConfig(f"{SEED_ENV} must be an integer, got {v!r}") from None


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None


def _load_spec(path) -> harness.ExperimentSpec:
    spec = harness.ExperimentSpec.from_dict(_load_json(path))
    seed = _seed_override()
    if seed is not None:
        spec.master_seed = seed
    return spec


def _write(path, text: str):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def cmd_solve(args) -> int:
    d = _load_json(args.config)
    oracle = oracle_from_dict(d["oracle"])
    region = region_from_dict(d["region"]) if "region" in d else oracle.region
    solver = dict(d["solver"])
    if args.trajectory:
        solver["record_trajectory"] = True
    cfg = config_from_dict(solver, oracle)
    x1 = np.array([float(v) for v in args.x1.split(",")])
    rng = None
    if not cfg.noise.is_none:
        seed = _seed_override()
        rng = np.random.default_rng(d.get("seed", 0) if seed is None else seed)
    if args.trajectory:
        rec, text = harness.trajectory_dump(oracle, cfg, x1, rng, region)
        _write(args.trajectory, text)
    else:
        rec = run(oracle, region, x1, cfg, rng)
    out = rec.to_dict()
    out.pop("trajectory", None)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_success_rate(args) -> int:
    spec = _load_spec(args.config)
    report = harness.run_experiment(spec, workers=args.workers)
    _write(args.out, report.to_json())
    for c in report.cells:
        print(f"{c.variant:>20} {json.dumps(c.params, sort_keys=True):>30} rate={c.rate:.3f} +- {c.stderr:.3f}")
    return 0


def cmd_failure_map(args) -> int:
    rhos = [float(v) for v in args.rho_list.split(",")]
    rows, summaries = harness.failure_region_map(rhos, grid=args.grid, k1=args.k1, r=args.r)
    _write(args.out, harness.failure_map_csv(rows))
    for s in summaries:
        print(f"rho={s.rho:g} cells={s.n_cells} fail={s.fail_fraction:.4f} agreement={s.agreement:.5f}")
    return 0


def cmd_bound_check(args) -> int:
    spec = _load_spec(args.config)
    rows = harness.bound_check(spec, args.theorem, workers=args.workers)
    _write(args.out, json.dumps(rows, indent=2, sort_keys=True) + "\n")
    ok = sum(r["satisfied"] for r in rows)
    print(f"{args.theorem}: {ok}/{len(rows)} rows satisfied")
    return 0


def cmd_tables(args) -> int:
    name = f"table{args.which}"
    spec = harness.bundled_spec(name)
    seed = args.seed if args.seed is not None else _seed_override()
    if seed is not None:
        spec.master_seed = seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.which == 2:
        rows = harness.table2(spec)
        (out / "table2.csv").write_text(harness.table2_csv(rows))
        print(harness.table2_csv(rows), end="")
        return 0
    report = harness.run_experiment(spec, workers=args.workers)
    report.write(out)
    print(report.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glide-opt", description="Projected subgradient and gliding-step experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one solve from a given start")
    s.add_argument("--config", required=True)
    s.add_argument("--x1", required=True, help="comma-separated start coordinates")
    s.add_argument("--trajectory", help="write the per-step CSV here")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("success-rate", help="run a seeded experiment spec")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_success_rate)

    s = sub.add_parser("failure-map", help="one-step PSG failure grid for the ellipse example")
    s.add_argument("--rho-list", default="2.5,3.5,5,7.5,10")
    s.add_argument("--grid", type=int, default=200)
    s.add_argument("--k1", type=float, default=2.0)
    s.add_argument("--r", type=float, default=100.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_failure_map)

    s = sub.add_parser("bound-check", help="compare ergodic gaps with a closed-form rate bound")
    s.add_argument("--config", required=True)
    s.add_argument("--theorem", required=True, help="bound tag, e.g. T3c1 or T8sc")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_bound_check)

    s = sub.add_parser("tables", help="reproduce one of the bundled success-rate tables")
    s.add_argument("--which", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_tables)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        # precondition / configuration errors (GlideOptError value and key subclasses included)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, GlideOptError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
