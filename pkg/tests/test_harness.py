import csv
import io
import json
import math

import numpy as np
import pytest

from glide_opt import harness
from glide_opt.analysis import e3_failure_probability
from glide_opt.errors import InvalidConfig
from glide_opt.oracles import NegEntropy, RenegarRatio
from glide_opt.schedules import AdaptiveG, Constant
from glide_opt.solver import UNDEFINED, SolverConfig, run, sample_interior, trial_rng

SMALL = {
    "name": "small",
    "oracle": {"example": "e1", "k1": 2.0, "r": 100.0},
    "sweep": {"k2": [5.0, 20.0]},
    "variants": [
        {"label": "psg", "solver": {"method": "psg", "alpha": {"type": "normalized"}}},
        {"label": "sgm", "solver": {"method": "sgm", "alpha": {"type": "adaptive-g", "a": 1.0}}},
    ],
    "n_trials": 60,
    "master_seed": 5,
    "success": {"max_iters": 100, "gap_threshold": 1e-3},
}


def test_spec_round_trip_and_hash():
    spec = harness.ExperimentSpec.from_dict(SMALL)
    again = harness.ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again.to_dict() == spec.to_dict()
    assert again.spec_hash() == spec.spec_hash()
    other = harness.ExperimentSpec.from_dict({**SMALL, "master_seed": 6})
    assert other.spec_hash() != spec.spec_hash()
    assert spec.cells() == [{"k2": 5.0}, {"k2": 20.0}]


@pytest.mark.parametrize("bad", [
    {k: v for k, v in SMALL.items() if k != "oracle"},
    {**SMALL, "n_trials": 0},
    {**SMALL, "variants": []},
    {**SMALL, "success": {"max_iters": 10, "gap_threshold": -1}},
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidConfig):
        harness.ExperimentSpec.from_dict(bad)


def test_report_invariants_and_determinism():
    spec = harness.ExperimentSpec.from_dict(SMALL)
    a = harness.run_experiment(spec)
    b = harness.run_experiment(spec, workers=2)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    for c in a.cells:
        assert 0 <= c.n_success <= c.n_trials
        assert c.rate == c.n_success / c.n_trials
        assert c.stderr == pytest.approx(math.sqrt(c.rate * (1 - c.rate) / c.n_trials))
    assert a.cell("sgm", k2=5.0).max_interior_violations == 0
    meta = json.loads(a.to_json())["metadata"]
    assert meta == {"seed": 5, "spec_hash": spec.spec_hash()}


def test_report_files(tmp_path):
    report = harness.run_experiment(harness.ExperimentSpec.from_dict({**SMALL, "n_trials": 5}))
    paths = report.write(tmp_path)
    assert [p.name for p in paths] == ["small.json", "small.csv", "small.timing.json"]
    rows = list(csv.DictReader(io.StringIO(paths[1].read_text())))
    assert len(rows) == 4 and float(rows[0]["rate"]) == report.cells[0].rate
    assert "wall_time_s" in json.loads(paths[2].read_text())


@pytest.mark.parametrize("name", harness.CONFIG_NAMES)
def test_bundled_specs_follow_success_conventions(name):
    spec = harness.bundled_spec(name)
    example = spec.oracle["example"]
    if example == "e1":
        assert (spec.max_iters, spec.gap_threshold) == (100, 1e-9)
    elif example == "e2":
        assert spec.gap_threshold == 5e-3
    else:
        assert (spec.max_iters, spec.gap_threshold) == (10, 1e-7)
    for v in spec.variants:
        spec.build(spec.cells()[0], v)


def test_unknown_bundled_spec():
    with pytest.raises(InvalidConfig):
        harness.bundled_spec("table9")


def test_failure_map():
    rows, summaries = harness.failure_region_map([2.5, 5.0, 10.0], grid=61)
    assert all(not r[3] and not r[4] for r in rows if r[2] == 0.0)
    assert all(s.agreement >= 0.999 for s in summaries)
    fr = [s.fail_fraction for s in summaries]
    assert fr[0] < fr[1] < fr[2]
    text = harness.failure_map_csv(rows[:3])
    assert text.splitlines()[0] == "rho,x1,x2,one_step_fail,predicate"


def test_trajectory_dump_example2():
    o = RenegarRatio()
    sgm = SolverConfig("sgm", AdaptiveG(math.sqrt(2), 1.0), Constant(0.5), max_iters=10_000)
    for i in range(3):
        rng = trial_rng(40, i)
        x1 = sample_interior(o.region, rng)
        rec, text = harness.trajectory_dump(o, sgm, x1)
        # the min-f threshold over random starts is an acceptance criterion; here only the dump itself
        assert rec.to_dict()["min_f"] == run(o, o.region, x1, sgm).min_f
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 10_000 and set(rows[0]) == {"s", "x1", "x2", "f", "gnorm", "alpha", "beta"}
        g = np.array([float(r["gnorm"]) for r in rows])
        assert g.max() > 10 * g[0]


def test_psg_example2_terminates():
    o = RenegarRatio()
    psg = SolverConfig("psg", AdaptiveG(math.sqrt(2), 1.0), max_iters=10_000)
    for i in range(10):
        rng = trial_rng(41, i)
        rec, _ = harness.trajectory_dump(o, psg, sample_interior(o.region, rng))
        assert rec.status.kind == UNDEFINED and rec.status.step <= 10_000


def test_adaptive_beta_comparison():
    o = NegEntropy(10_000, 2.0)
    for seed in range(20):
        recs, text = harness.adaptive_beta_comparison(seed=seed)
        sgm = {k: r for k, r in recs.items() if k != "psg"}
        assert all(str(r.status) == "Completed" and r.interior_violations == 0 for r in sgm.values())
        gaps = {k: o.evaluate(r.final_point) - o.f_star for k, r in sgm.items()}
        assert gaps["sgm-searched"] <= 1e-7 and gaps["sgm-beta-0.5"] <= 1e-7
        fixed = min(v for k, v in gaps.items() if k != "sgm-searched")
        assert gaps["sgm-searched"] <= fixed + 1e-12
        assert recs["psg"].status.kind == UNDEFINED and recs["psg"].status.step <= 10
    lines = text.splitlines()
    assert lines[0].split(",")[0] == "s" and len(lines) == 12


def test_e3_one_step_frequency_matches_analytic():
    for n in (1, 10):
        freq = harness.e3_one_step_failure_frequency(2.0, n, 20_000, seed=n)
        p = e3_failure_probability(2.0, n).prob
        assert abs(freq - p) <= 3 * math.sqrt(max(p * (1 - p), 1e-12) / 20_000) + 1e-12


def test_table2_rows():
    spec = harness.bundled_spec("table2")
    rows = harness.table2(spec, cases=(50, 80))
    assert len(rows) == 2 * len(spec.variants)
    assert all(r.actual <= r.preset for r in rows)
    for r in rows:
        if r.method == "psg" and r.failing_step is not None:
            assert r.actual == r.failing_step - 1
    text = harness.table2_csv(rows)
    assert text.startswith("case,step,method,preset_iters")


def test_bound_check_rows():
    spec = harness.ExperimentSpec.from_dict({
        "name": "bc", "oracle": {"example": "l1-box", "n": 2}, "n_trials": 5, "master_seed": 1,
        "success": {"max_iters": 100},
        "variants": [{"label": "v", "solver": {"method": "sgm", "alpha": {"type": "constant-horizon"}}}],
    })
    rows = harness.bound_check(spec, "T3c1")
    assert len(rows) == 5
    assert all(set(r) == {"tag", "params", "bound", "empirical_gap", "satisfied"} for r in rows)
    assert all(r["satisfied"] for r in rows)
    assert rows[0]["bound"] == pytest.approx(2.0 / (0.5 * 10))
    with pytest.raises(InvalidConfig):
        harness.bound_check(spec, "T42")
