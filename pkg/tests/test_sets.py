import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glide_opt.errors import DimensionMismatch, InvalidConfig
from glide_opt.sets import (
    TAU_PROJ,
    Ball,
    Box,
    Ellipse2D,
    contains,
    nonexpansiveness_gap,
    project,
    region_from_dict,
    strictly_interior,
)

ELL = Ellipse2D(2.0, 5.0, 100.0)
BOX = Box(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
BALL = Ball(np.zeros(2), 1.0)

coord = st.floats(-30, 30, allow_nan=False)
pt = st.tuples(coord, coord).map(np.array)


def test_contains_examples():
    assert contains(BALL, [0.0, 0.0])
    assert contains(ELL, [math.sqrt(50), 0.0])
    assert not contains(BOX, [1.5, 0.0])


def test_strictly_interior_examples():
    assert strictly_interior(ELL, [0.0, 0.0])
    assert not strictly_interior(ELL, [math.sqrt(50), 0.0])
    assert not strictly_interior(BOX, [1e-14, 0.5])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        contains(BALL, [0.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        project(ELL, [1.0])


@pytest.mark.parametrize("bad", [
    lambda: Ball(np.zeros(2), 0.0),
    lambda: Box(np.zeros(2), np.array([1.0, 0.0])),
    lambda: Ellipse2D(0.0, 1.0, 1.0),
    lambda: Ellipse2D(1.0, 1.0, -1.0),
])
def test_invalid_regions(bad):
    with pytest.raises(InvalidConfig):
        bad()


def test_ellipse_projection_examples():
    r = project(ELL, [1.0, 1.0])
    assert np.array_equal(r.point, [1.0, 1.0]) and not r.landed_on_boundary
    r = project(ELL, [10.0, 0.0])
    assert r.point == pytest.approx([math.sqrt(50), 0.0], abs=1e-12)
    assert r.landed_on_boundary
    r = project(ELL, [8.0, 4.0])
    assert abs(r.constraint_residual) <= 1e-12


def test_ellipse_projection_matches_boundary_grid():
    # independent oracle: closest point on a dense parametric boundary
    th = np.linspace(0.0, 2 * np.pi, 1_000_000, endpoint=False)
    bx, by = math.sqrt(50) * np.cos(th), math.sqrt(20) * np.sin(th)
    rng = np.random.default_rng(3)
    for y in [np.array([8.0, 4.0]), *rng.uniform(-20, 20, size=(20, 2))]:
        if ELL.slack(y) >= 0:
            continue
        d = np.hypot(bx - y[0], by - y[1])
        i = int(np.argmin(d))
        p = project(ELL, y).point
        # a 1e6-point grid has arc spacing ~4.4e-5, so position agreement is checked at that scale
        assert np.linalg.norm(p - [bx[i], by[i]]) <= (1e-5 if y[0] == 8.0 else 5e-5)
        assert np.linalg.norm(p - y) <= d[i] + 1e-5


def test_boundary_input_returns_itself():
    y = np.array([1.0, 0.3])
    r = project(BOX, y)
    assert np.array_equal(r.point, y) and r.landed_on_boundary


def test_ball_and_box_clamps():
    assert project(BALL, [2.0, 0.0]).point == pytest.approx([1.0, 0.0])
    assert np.array_equal(project(BOX, [2.0, -3.0]).point, [1.0, -1.0])


def test_nonexpansiveness_examples():
    assert nonexpansiveness_gap(BALL, [2.0, 0.0], [0.0, 2.0]) == pytest.approx(math.sqrt(2) - 2 * math.sqrt(2))
    assert nonexpansiveness_gap(ELL, [9.0, 9.0], [9.0, 9.0]) <= 0.0


def test_ellipse_nonexpansive_random_pairs():
    rng = np.random.default_rng(11)
    Y = rng.uniform(-25, 25, size=(10_000, 4))
    worst = max(nonexpansiveness_gap(ELL, y[:2], y[2:]) for y in Y)
    assert worst <= 1e-11


@pytest.mark.parametrize("region", [ELL, BOX, BALL, Ellipse2D(7.0, 0.5, 3.0)])
@settings(max_examples=200, deadline=None)
@given(y=pt)
def test_idempotence(region, y):
    p = project(region, y).point
    assert np.allclose(project(region, p).point, p, rtol=0, atol=10 * TAU_PROJ * max(1.0, np.abs(p).max()))


@pytest.mark.parametrize("region", [ELL, BOX, BALL])
@settings(max_examples=200, deadline=None)
@given(a=pt, b=pt)
def test_nonexpansive_property(region, a, b):
    assert nonexpansiveness_gap(region, a, b) <= 10 * TAU_PROJ * max(1.0, np.abs(a).max(), np.abs(b).max())


@pytest.mark.parametrize("region", [ELL, BOX, BALL])
@settings(max_examples=200, deadline=None)
@given(y=pt)
def test_interior_points_fixed_and_membership_order(region, y):
    if strictly_interior(region, y):
        assert np.array_equal(project(region, y).point, y)
        assert contains(region, y)
    if not contains(region, y):
        assert not strictly_interior(region, y)


def test_projection_lands_in_region():
    rng = np.random.default_rng(5)
    for y in rng.uniform(-40, 40, size=(2000, 2)):
        assert ELL.slack(project(ELL, y).point) >= -1e-12 * 100


def test_row_wise_matches_scalar():
    rng = np.random.default_rng(8)
    Y = rng.uniform(-20, 20, size=(500, 2))
    P = ELL.project_rows(Y)
    for y, p in zip(Y, P):
        assert np.array_equal(ELL.project_point(y), p)


@pytest.mark.parametrize("region", [ELL, BOX, BALL])
def test_json_round_trip(region):
    back = region_from_dict(region.to_dict())
    assert back.to_dict() == region.to_dict()


def test_unknown_region_type():
    with pytest.raises(InvalidConfig):
        region_from_dict({"type": "simplex"})
