import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from watter.domain import make_order
from watter.routing import (DROPOFF, PICKUP, GroupTooLarge, average_extra_time, check_route, group_expiry,
                            group_slack, member_extra_times, plan_best_route)
from watter.scenarios import load_scenario
from watter.spatial import GeodesicModel

from .helpers import random_orders
from .oracles import brute_route

MODEL = GeodesicModel(10.0)


def test_example_pairs():
    sc = load_scenario()
    o = {x.id: x for x in sc.orders}
    r13 = plan_best_route([o[1], o[3]], sc.model, 12_000, capacity=2)
    r24 = plan_best_route([o[2], o[4]], sc.model, 12_000, capacity=2)
    assert r13.total_cost == 180_000 and r24.total_cost == 120_000
    assert r13.total_cost + r24.total_cost == 300_000
    assert r24.stops == ((2, PICKUP), (4, PICKUP), (2, DROPOFF), (4, DROPOFF))


def test_singleton_route():
    o = make_order(5, (104.0, 30.6), (104.01, 30.6), 0, MODEL.cost((104.0, 30.6), (104.01, 30.6)))
    r = plan_best_route([o], MODEL, 1_000)
    assert r.stops == ((5, PICKUP), (5, DROPOFF))
    assert r.detour == {5: 0}
    assert r.expiry == o.deadline - o.direct == o.dead_at
    assert r.feasible_at(o.dead_at - 1) and not r.feasible_at(o.dead_at)
    assert plan_best_route([o], MODEL, o.dead_at) is None


@pytest.mark.parametrize("seed", range(4))
def test_matches_permutation_oracle(seed):
    rng = np.random.default_rng(seed)
    feasible_triples = 0
    for _ in range(150):
        k = int(rng.integers(1, 4))
        group = random_orders(rng, k, MODEL, spread=0.012, tau=(1.3, 3.0), release_span=20_000,
                              first_id=int(rng.integers(0, 50)) * 4, corridor=bool(rng.random() < 0.5))
        t = max(o.release for o in group) + int(rng.integers(0, 20_000))
        cap = int(rng.integers(1, 4))
        got = plan_best_route(group, MODEL, t, capacity=cap)
        want = brute_route(group, MODEL, t, capacity=cap)
        if want is None:
            assert got is None
        else:
            assert (got.total_cost, got.stops) == want
            check_route(group, got, t, capacity=cap)
            feasible_triples += k == 3
    assert feasible_triples >= 5


@given(st.integers(0, 10**6))
def test_route_properties(seed):
    rng = np.random.default_rng(seed)
    group = random_orders(rng, 3, MODEL, spread=0.01, tau=(2.0, 3.0))
    r = plan_best_route(group, MODEL, 0)
    if r is None:
        return
    check_route(group, r, 0)
    assert all(d >= -len(r.stops) for d in r.detour.values())  # per-leg rounding only
    assert r.peak_load <= 3
    # the route stays optimal until its expiry and is infeasible from then on
    before = plan_best_route(group, MODEL, r.expiry - 1)
    assert before is not None and before.total_cost == r.total_cost
    after = plan_best_route(group, MODEL, r.expiry)
    assert after is None or after.total_cost > r.total_cost or after.stops > r.stops


def test_capacity_and_riders():
    a = make_order(1, (104.0, 30.6), (104.02, 30.6), 0, MODEL.cost((104.0, 30.6), (104.02, 30.6)),
                   tau_scale=3, riders=2)
    b = make_order(2, (104.001, 30.6), (104.021, 30.6), 0, MODEL.cost((104.001, 30.6), (104.021, 30.6)),
                   tau_scale=3, riders=2)
    assert plan_best_route([a, b], MODEL, 0, capacity=4).peak_load == 4
    r = plan_best_route([a, b], MODEL, 0, capacity=3)
    assert r.peak_load == 2  # must drop one before picking the other
    assert plan_best_route([a], MODEL, 0, capacity=1) is None
    with pytest.raises(GroupTooLarge):
        plan_best_route([a, b], MODEL, 0, k_max=1)
    with pytest.raises(ValueError):
        plan_best_route([], MODEL, 0)


def test_worker_origin_shrinks_expiry():
    rng = np.random.default_rng(1)
    group = random_orders(rng, 2, MODEL, spread=0.005, tau=(3.0, 3.0))
    plain = plan_best_route(group, MODEL, 0)
    origin = (104.05, 30.65)
    far = plan_best_route(group, MODEL, 0, worker_origin=origin)
    if far is not None:
        assert far.approach > 0
        assert far.expiry <= plain.expiry


def test_expiry_helpers():
    rng = np.random.default_rng(2)
    group = random_orders(rng, 2, MODEL, spread=0.004, tau=(2.5, 2.5))
    r = plan_best_route(group, MODEL, 0)
    assert group_expiry(group, r, 0) == r.expiry
    assert group_slack(group, r, 100) == r.expiry - 100
    assert group_slack(group, r, r.expiry + 5) == 0
    te = member_extra_times(group, r, 10_000)
    assert te == {o.id: r.detour[o.id] + 10_000 - o.release for o in group}
    assert average_extra_time(group, r, 10_000) == pytest.approx(sum(te.values()) / 2)
    assert math.isclose(average_extra_time(group, r, 10_000, alpha=0, beta=2), 20_000)
