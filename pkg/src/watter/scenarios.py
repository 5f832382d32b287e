"""The six-node toy city and three ways of serving its four orders.

The bundled files under ``data/example1`` describe a road network with
60-second roads, four orders and two workers. Each strategy below returns the
total worker travel in milliseconds. A worker's first leg to the pickup of its
first job is not counted; every later repositioning leg is.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path

from .domain import Order, Worker, make_order
from .routing import RoutePlan, plan_best_route
from .spatial import GraphModel

NODE_NAMES = "abcdef"


@dataclass
class Scenario:
    model: GraphModel
    orders: list[Order]
    workers: list[Worker]


@dataclass
class Outcome:
    """Groups in dispatch order and per-worker travel (ms)."""

    groups: list[tuple] = field(default_factory=list)
    travel: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.travel.values())


def _data_dir(path=None) -> Path:
    if path is not None:
        return Path(path)
    return Path(str(resources.files("watter") / "data" / "example1"))


def load_scenario(path=None, tau_scale: float = 3.0, eta_scale: float = 0.8) -> Scenario:
    """Read ``graph.txt``, ``orders.csv`` and ``workers.csv`` from ``path``.

    The toy city states no deadlines. The loose default ``tau_scale`` keeps
    one-road trips poolable; at 1.6 the last order could never share.
    """
    base = _data_dir(path)
    model = GraphModel.from_file(base / "graph.txt")
    orders = []
    with open(base / "orders.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            p, d = int(row["pickup_node"]), int(row["dropoff_node"])
            orders.append(make_order(int(row["order_id"]), p, d, round(float(row["release_time_s"]) * 1000),
                                     model.cost(p, d), tau_scale, eta_scale))
    workers = []
    with open(base / "workers.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            workers.append(Worker(int(row["worker_id"]), int(row["node"]), int(row["capacity"])))
    orders.sort(key=lambda o: (o.release, o.id))
    return Scenario(model, orders, workers)


class _Fleet:
    """Workers that serve one group at a time, counted from their first pickup."""

    def __init__(self, workers, model):
        self.model = model
        self.loc = {w.id: w.location for w in workers}
        self.free = {w.id: 0 for w in workers}
        self.travel = {w.id: 0 for w in workers}
        self.started = {w.id: False for w in workers}

    def serve(self, t: int, route: RoutePlan) -> int:
        """Give ``route`` to the earliest free worker (ties: nearest, then id)."""
        start = route.locations[0]
        wid = min(self.free, key=lambda w: (max(self.free[w], t), self.model.cost(self.loc[w], start), w))
        approach = self.model.cost(self.loc[wid], start) if self.started[wid] else 0
        self.started[wid] = True
        self.travel[wid] += approach + route.total_cost
        self.free[wid] = max(self.free[wid], t) + approach + route.total_cost
        self.loc[wid] = route.locations[-1]
        return wid


def serve_sequentially(sc: Scenario) -> Outcome:
    """No sharing: each order in release order goes to the earliest free worker."""
    fleet = _Fleet(sc.workers, sc.model)
    out = Outcome()
    for o in sc.orders:
        fleet.serve(o.release, plan_best_route([o], sc.model, o.release))
        out.groups.append((o.id,))
    out.travel = dict(fleet.travel)
    return out


def batch_greedy(sc: Scenario, batch_s: int = 10, capacity: int = 2) -> Outcome:
    """Fixed batches closing every ``batch_s`` seconds, paired by largest saving.

    A batch round covers releases in ``(r * batch_s, (r + 1) * batch_s]`` and
    is matched at its closing instant. Within a round, the feasible pair that
    saves the most travel over serving both alone is taken first; equal
    savings go to the smaller id pair.
    """
    period = batch_s * 1000
    rounds: dict[int, list[Order]] = {}
    for o in sc.orders:
        rounds.setdefault(max(math.ceil(o.release / period) - 1, 0), []).append(o)
    fleet = _Fleet(sc.workers, sc.model)
    out = Outcome()
    for r in sorted(rounds):
        t = (r + 1) * period
        left = {o.id: o for o in rounds[r]}
        alone = {oid: plan_best_route([o], sc.model, t) for oid, o in left.items()}
        pairs = []
        if capacity >= 2:
            for a, b in combinations(sorted(left), 2):
                route = plan_best_route([left[a], left[b]], sc.model, t, capacity=capacity)
                if route is not None and alone[a] is not None and alone[b] is not None:
                    saving = alone[a].total_cost + alone[b].total_cost - route.total_cost
                    pairs.append((-saving, (a, b), route))
        pairs.sort(key=lambda x: (x[0], x[1]))
        chosen = []
        for neg_saving, (a, b), route in pairs:
            if neg_saving < 0 and a in left and b in left:
                chosen.append(((a, b), route))
                del left[a], left[b]
        chosen += [((oid,), alone[oid]) for oid in sorted(left) if alone[oid] is not None]
        for group, route in sorted(chosen, key=lambda x: x[0]):
            fleet.serve(t, route)
            out.groups.append(group)
    out.travel = dict(fleet.travel)
    return out


def _partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def pooled_optimal(sc: Scenario, t_pool: int | None = None) -> Outcome:
    """Cheapest split of the pooled orders into at most one group per worker.

    Every group must have a feasible route at ``t_pool`` (default: the last
    release) within the smallest worker capacity. Ties prefer fewer groups,
    then the lexicographically smallest grouping.
    """
    t = max(o.release for o in sc.orders) if t_pool is None else t_pool
    cap = min(w.capacity for w in sc.workers)
    by_id = {o.id: o for o in sc.orders}
    routes: dict[tuple, RoutePlan | None] = {}
    best = None
    for part in _partitions(sorted(by_id)):
        if len(part) > len(sc.workers) or any(len(g) > cap for g in part):
            continue
        groups = sorted(tuple(sorted(g)) for g in part)
        for g in groups:
            if g not in routes:
                routes[g] = plan_best_route([by_id[i] for i in g], sc.model, t, capacity=cap)
        if any(routes[g] is None for g in groups):
            continue
        key = (sum(routes[g].total_cost for g in groups), len(groups), groups)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("no feasible grouping")
    fleet = _Fleet(sc.workers, sc.model)
    out = Outcome()
    for g in best[2]:
        fleet.serve(t, routes[g])
        out.groups.append(g)
    out.travel = dict(fleet.travel)
    return out


def run_example(path=None) -> dict:
    """Totals in whole minutes for the three strategies."""
    sc = load_scenario(path)
    outcomes = {"sequential": serve_sequentially(sc), "batch": batch_greedy(sc), "pooled": pooled_optimal(sc)}
    return {name: {"total_min": o.total / 60_000, "groups": [list(g) for g in o.groups],
                   "travel_ms": {str(k): v for k, v in sorted(o.travel.items())}}
            for name, o in outcomes.items()}
