import pytest
from hypothesis import given, strategies as st

from watter.domain import (Order, RejectedRecord, ServedRecord, Worker, extra_time, make_order,
                           max_response_time, objective)


def test_make_order_arithmetic():
    o = make_order(1, 0, 1, release=0, direct=600_000)
    assert o.deadline == 960_000
    assert o.wait_limit == 480_000
    assert max_response_time(o) == o.penalty == 360_000
    assert o.timeout_at == 480_000
    assert o.dead_at == 360_000


@given(st.integers(0, 10**7), st.integers(1, 10**6), st.floats(1.01, 3.0))
def test_penalty_is_latest_wait(release, direct, tau):
    o = make_order(0, 0, 1, release, direct, tau_scale=tau)
    # waiting exactly the penalty leaves only the direct ride before the deadline
    assert o.release + o.penalty + o.direct == o.deadline


def test_order_validation():
    with pytest.raises(ValueError):
        Order(1, 0, 1, release=10, deadline=15, wait_limit=0, direct=10)
    with pytest.raises(ValueError):
        Order(1, 0, 1, release=0, deadline=100, wait_limit=-1, direct=10)
    with pytest.raises(ValueError):
        Order(1, 0, 1, release=0, deadline=100, wait_limit=1, direct=10, riders=0)
    with pytest.raises(ValueError):
        Worker(1, 0, capacity=0)


def test_extra_time_weights():
    assert extra_time(20, 30) == 50
    assert extra_time(20, 30, alpha=2, beta=0.5) == 55
    with pytest.raises(ValueError):
        extra_time(-1, 0)


def test_objective_sums_extra_and_penalties():
    served = [ServedRecord(1, 30, 20, 50, 0), ServedRecord(2, 0, 0, 0, 0)]
    rejected = [RejectedRecord(3, 360)]
    assert objective(served, rejected) == 410
    with pytest.raises(ValueError):
        objective(served, [RejectedRecord(1, 5)])
