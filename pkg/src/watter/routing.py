"""Minimum-cost feasible routes for order groups."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .domain import Order

PICKUP, DROPOFF = 0, 1


class GroupTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class RoutePlan:
    """A stop sequence for a group.

    ``stops`` holds ``(order_id, PICKUP|DROPOFF)`` tags. ``sub_cost[i]`` is the
    cost from the first stop through order ``i``'s drop-off. ``expiry`` is the
    absolute time from which the route stops being feasible.
    """

    stops: tuple
    locations: tuple
    total_cost: int
    sub_cost: dict
    detour: dict
    expiry: int
    peak_load: int
    approach: int = 0

    @property
    def order_ids(self) -> tuple:
        return tuple(sorted(self.sub_cost))

    def feasible_at(self, t_now: int) -> bool:
        return t_now < self.expiry


@lru_cache(maxsize=None)
def _stop_tree(k: int) -> tuple:
    """Prefix tree of valid stop orders for ``k`` orders.

    Stop ``j < k`` is the pickup of the ``j``-th order (by id) and ``k + j``
    its drop-off. Children are listed in stop-tag order, so a depth-first walk
    meets complete sequences in lexicographic tag order.
    """
    def children(picked: int, dropped: int) -> tuple:
        out = []
        for j in range(k):
            if not picked >> j & 1:
                out.append((j, children(picked | 1 << j, dropped)))
            elif not dropped >> j & 1:
                out.append((k + j, children(picked, dropped | 1 << j)))
        return tuple(out)

    return children(0, 0)


def plan_best_route(group: Sequence[Order], model, t_now: int, worker_origin=None,
                    capacity: int | None = None, k_max: int | None = None) -> RoutePlan | None:
    """Cheapest stop interleaving meeting the sequence, deadline and capacity rules.

    Returns ``None`` when no interleaving is feasible at ``t_now``. Equal-cost
    routes resolve to the lexicographically smallest stop-tag sequence.
    """
    orders = sorted(group, key=lambda o: o.id)
    k = len(orders)
    if k == 0:
        raise ValueError("empty group")
    if k_max is not None and k > k_max:
        raise GroupTooLarge(f"group of {k} exceeds cap {k_max}")
    if capacity is None:
        capacity = math.inf

    locs = [o.pickup for o in orders] + [o.dropoff for o in orders]
    n = 2 * k
    cost = [[0] * n for _ in range(n)]
    for a in range(n):
        row = cost[a]
        for b in range(a + 1, n):
            row[b] = cost[b][a] = model.cost(locs[a], locs[b])
    if worker_origin is not None:
        approach_to = [model.cost(worker_origin, locs[j]) for j in range(k)]
    else:
        approach_to = [0] * k
    limit = [o.deadline - t_now for o in orders]
    riders = [o.riders for o in orders]

    best_cost = math.inf
    best_seq: list | None = None
    best_approach = 0
    seq: list[int] = []

    # legs are rounded separately, so a multi-leg path may undercut the
    # direct cost by up to one unit per leg; ``n`` covers that
    slack = n

    def walk(nodes, last: int, c: int, load: int, appr: int, open_: tuple):
        nonlocal best_cost, best_seq, best_approach
        if not nodes:
            if c < best_cost:
                best_cost, best_seq, best_approach = c, list(seq), appr
            return
        row = cost[last]
        for s, sub in nodes:
            nc = c + row[s]
            if nc > best_cost:
                continue
            if s >= k:
                j = s - k
                if appr + nc >= limit[j]:
                    continue
                rest = tuple(x for x in open_ if x != j)
                nl = load - riders[j]
            else:
                nl = load + riders[s]
                if nl > capacity:
                    continue
                rest = open_
            # every order still to be dropped needs at least the direct leg
            srow = cost[s]
            lb = nc - slack
            for x in rest:
                lx = lb + srow[k + x]
                if lx > best_cost or appr + lx >= limit[x]:
                    break
            else:
                seq.append(s)
                walk(sub, s, nc, nl, appr, rest)
                seq.pop()

    everyone = tuple(range(k))
    for s, sub in _stop_tree(k):
        if riders[s] > capacity:
            continue
        seq.append(s)
        walk(sub, s, 0, riders[s], approach_to[s], everyone)
        seq.pop()
    if best_seq is None:
        return None

    c = load = peak = 0
    prev = None
    sub_cost = {}
    for s in best_seq:
        if prev is not None:
            c += cost[prev][s]
        if s < k:
            load += riders[s]
            peak = max(peak, load)
        else:
            load -= riders[s - k]
            sub_cost[orders[s - k].id] = c
        prev = s
    detour = {o.id: sub_cost[o.id] - o.direct for o in orders}
    expiry = min(o.deadline - best_approach - sub_cost[o.id] for o in orders)
    return RoutePlan(
        stops=tuple((orders[s % k].id, s // k) for s in best_seq),
        locations=tuple(locs[s] for s in best_seq),
        total_cost=int(best_cost),
        sub_cost=sub_cost,
        detour=detour,
        expiry=expiry,
        peak_load=peak,
        approach=best_approach,
    )


def group_expiry(group: Sequence[Order], route: RoutePlan, t_now: int) -> int:
    """Absolute expiry: ``t_now`` plus the smallest member slack (never before ``t_now``)."""
    slack = min(o.deadline - o.release - (route.approach + route.sub_cost[o.id]) - (t_now - o.release)
                for o in group)
    return t_now + max(slack, 0)


def member_extra_times(group: Sequence[Order], route: RoutePlan, t_now: int,
                       alpha: float = 1.0, beta: float = 1.0) -> dict:
    return {o.id: alpha * route.detour[o.id] + beta * (t_now - o.release) for o in group}


def average_extra_time(group: Sequence[Order], route: RoutePlan, t_now: int,
                       alpha: float = 1.0, beta: float = 1.0) -> float:
    te = member_extra_times(group, route, t_now, alpha, beta)
    return sum(te.values()) / len(te)


def check_route(group: Sequence[Order], route: RoutePlan, t_now: int, capacity=math.inf) -> None:
    """Assert the sequencing, deadline and capacity rules on ``route``."""
    seen_pick: set = set()
    done: set = set()
    load = 0
    by_id = {o.id: o for o in group}
    for oid, kind in route.stops:
        if kind == PICKUP:
            assert oid not in seen_pick, f"order {oid} picked up twice"
            seen_pick.add(oid)
            load += by_id[oid].riders
            assert load <= capacity, "capacity exceeded"
        else:
            assert oid in seen_pick and oid not in done, f"order {oid} dropped before pickup"
            done.add(oid)
            load -= by_id[oid].riders
    assert done == set(by_id), "not every member is served"
    for o in group:
        assert t_now + route.approach + route.sub_cost[o.id] < o.deadline, f"order {o.id} misses its deadline"


def group_slack(group: Sequence[Order], route: RoutePlan, t_now: int) -> int:
    """Remaining validity of ``route`` from ``t_now``; zero once expired."""
    return group_expiry(group, route, t_now) - t_now
