import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glide_opt.errors import InvalidConfig, MissingEvaluator, ZeroSubgradient
from glide_opt.schedules import (
    AdaptiveG,
    AlphaBetaW,
    AlphaW,
    BetaW,
    Constant,
    ConstantHorizon,
    ConstantW,
    DecayingRL,
    InverseAlphaK,
    Normalized,
    One,
    PowerK,
    SearchedSet,
    StronglyConvexJoint,
    StronglyConvexLinear,
    alpha_from_dict,
    beta_from_dict,
    check_C1,
    family_weight,
    weight_from_dict,
)

gnorms = st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=300)


def test_alpha_examples():
    assert DecayingRL(10, 2).alpha_next(4, 1.0) == 2.5
    assert ConstantHorizon(1, 2, 100).alpha_next(7, 3.0) == 1 / 20
    assert Normalized(2).alpha_next(4, 4.0) == 0.25
    a = AdaptiveG(1, 1.0)
    assert a.alpha_next(1, 3.0) == pytest.approx(1 / 3)
    assert StronglyConvexJoint(0.5).alpha_next(1, 1.0, beta=0.5) == 4.0


def test_adaptive_g_hand_trace():
    a = AdaptiveG(1.0, 0.0)
    a.alpha_next(1, 5.0)
    a.alpha_next(2, 1.0)
    a.alpha_next(3, 1.0)
    assert a.alpha_next(4, 2.0) == pytest.approx(0.2)
    assert a.G == 5.0


@settings(max_examples=100, deadline=None)
@given(g=gnorms, a=st.sampled_from([0.0, 0.25, 0.5, 1.0]))
def test_adaptive_g_closed_form_and_monotone(g, a):
    rule = AdaptiveG(2.0, a)
    prev = -math.inf
    for s, gn in enumerate(g, start=1):
        alpha = rule.alpha_next(s, gn)
        assert rule.G >= prev
        prev = rule.G
        closed = max(gj * j ** ((1 - a) / 2) for j, gj in enumerate(g[:s], start=1))
        assert rule.G == closed
        assert alpha > 0


@settings(max_examples=100, deadline=None)
@given(s=st.integers(1, 10**6), beta=st.floats(1e-3, 1.0), mu=st.floats(1e-3, 1e3))
def test_C3_identity(s, beta, mu):
    assert StronglyConvexJoint(mu).alpha_next(s, 1.0, beta) * beta == pytest.approx(2 / (mu * (s + 1)), rel=4e-16)


def test_zero_subgradient():
    with pytest.raises(ZeroSubgradient):
        Normalized(1).alpha_next(1, 0.0)
    with pytest.raises(ZeroSubgradient):
        AdaptiveG(1, 0.5).alpha_next(1, 0.0)


def test_beta_rules():
    assert One().beta_next(3) == 1.0
    assert Constant(0.5).beta_next(9) == 0.5
    vals = {0.1: 3.0, 0.5: 1.0, 0.9: 2.0}
    assert SearchedSet((0.1, 0.5, 0.9)).beta_next(1, vals.get) == 0.5
    vals = {0.1: 1.0, 0.5: 1.0, 0.9: 2.0}
    assert SearchedSet((0.9, 0.5, 0.1)).beta_next(1, vals.get) == 0.1
    assert SearchedSet((0.1, 0.5, 0.9)).floor_c == 0.1
    with pytest.raises(MissingEvaluator):
        SearchedSet().beta_next(1)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidConfig):
            Constant(bad)
    with pytest.raises(InvalidConfig):
        SearchedSet((0.5, 1.0))


def test_weight_examples():
    assert PowerK(2).weight_next(9, 1.0, 1.0) == 9
    assert InverseAlphaK(-1).weight_next(1, 0.25, 1.0) == 0.25
    assert AlphaBetaW().weight_next(1, 0.2, 0.5) == pytest.approx(0.1)
    assert AlphaW().weight_next(1, 0.2, 0.5) == 0.2
    assert BetaW().weight_next(1, 0.2, 0.5) == 0.5
    assert ConstantW().weight_next(5, 0.2, 0.5) == 1.0
    assert StronglyConvexLinear().weight_next(7, 0.2, 0.5) == 7
    assert isinstance(family_weight(0), InverseAlphaK)
    assert isinstance(family_weight(0.5), PowerK)
    with pytest.raises(InvalidConfig):
        InverseAlphaK(0.5)
    with pytest.raises(InvalidConfig):
        PowerK(-2)


def test_check_C1_examples():
    hist = [(BetaW().weight_next(s, a, 0.5), a, 0.5) for s in range(1, 50) for a in [DecayingRL(1, 1).alpha_next(s, 1)]]
    assert check_C1(hist)
    hist = []
    rule = Normalized(1.0)
    for s, g in enumerate(np.random.default_rng(0).uniform(0.1, 10, 100), start=1):
        a = rule.alpha_next(s, g)
        hist.append((AlphaBetaW().weight_next(s, a, 0.3), a, 0.3))
    assert check_C1(hist)
    assert not check_C1([(2.0, 1.0, 1.0), (1.0, 1.0, 1.0)])


CONVEX_PAIRINGS = [
    (lambda: ConstantHorizon(1.0, 1.0, 1000), ConstantW),
    (lambda: DecayingRL(1.0, 1.0), lambda: family_weight(-0.5)),
    (lambda: DecayingRL(1.0, 1.0), lambda: family_weight(0.0)),
    (lambda: DecayingRL(1.0, 1.0), lambda: family_weight(1.0)),
    (lambda: Normalized(1.0), AlphaW),
    (lambda: AdaptiveG(1.0, 1.0), lambda: family_weight(-1.0)),
    (lambda: AdaptiveG(1.0, 0.5), lambda: family_weight(0.0)),
    (lambda: AdaptiveG(1.0, 1.0), lambda: family_weight(2.0)),
    (lambda: ConstantHorizon(1.0, 1.0, 1000), BetaW),
    (lambda: DecayingRL(1.0, 1.0), BetaW),
    (lambda: Normalized(1.0), AlphaBetaW),
    (lambda: AdaptiveG(1.0, 1.0), BetaW),
]


@pytest.mark.parametrize("make_alpha,make_w", CONVEX_PAIRINGS)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_C1_holds_for_named_pairings(make_alpha, make_w, seed):
    rng = np.random.default_rng(seed)
    g = np.exp(rng.uniform(-5, 5, size=1000))
    beta = float(rng.uniform(0.05, 0.95))
    alpha, w = make_alpha(), make_w()
    hist = []
    for s, gn in enumerate(g, start=1):
        a = alpha.alpha_next(s, gn)
        hist.append((w.weight_next(s, a, beta), a, beta))
    assert check_C1(hist)


def test_row_wise_alpha_matches_scalar():
    rng = np.random.default_rng(4)
    G = np.exp(rng.uniform(-3, 3, size=(40, 8)))
    for a in (0.0, 0.5, 1.0):
        batch = AdaptiveG(2.0, a)
        batch.start(8)
        rows = np.arange(8)
        for s in range(1, 41):
            got = batch.alpha_rows(s, G[s - 1], 0.5, rows)
            for j in range(8):
                scalar = AdaptiveG(2.0, a)
                want = [scalar.alpha_next(q, G[q - 1, j]) for q in range(1, s + 1)][-1]
                assert got[j] == want


def test_json_forms():
    a = alpha_from_dict({"type": "adaptive-g", "R": 10, "a": 0.5})
    assert isinstance(a, AdaptiveG) and a.R == 10 and a.a == 0.5
    assert alpha_from_dict({"type": "decaying"}, {"R": 2, "L": 1}).alpha_next(1, 1) == 2
    assert beta_from_dict({"type": "constant", "value": 0.5}).beta == 0.5
    assert isinstance(weight_from_dict({"type": "power-k", "k": 0}), PowerK)
    for rule in (a, Constant(0.3), SearchedSet(), One(), InverseAlphaK(-0.5), StronglyConvexLinear()):
        d = rule.to_dict()
        parse = alpha_from_dict if "R" in d or "mu" in d else beta_from_dict if d["type"] in (
            "one", "constant", "searched") else weight_from_dict
        assert parse(d).to_dict() == d
    with pytest.raises(InvalidConfig):
        alpha_from_dict({"type": "decaying"})
    with pytest.raises(InvalidConfig):
        alpha_from_dict({"type": "polyak"})
