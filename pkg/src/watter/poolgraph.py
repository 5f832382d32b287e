"""Temporal shareability graph with a per-order best-group map.

Nodes are pending orders. An edge ``(i, j, expiry)`` says the two orders can
share a vehicle until ``expiry``. Every pending order keeps a best-group entry:
the clique containing it whose cheapest feasible route has the smallest
average extra time.

Ranking uses a time-invariant key. A group's average extra time at ``t`` is
``alpha * mean(detour) + beta * (t - mean(release))``, so the ordering between
groups does not change as the clock advances; only feasibility does.

When the cached route of a singleton or larger clique expires, that group is
replanned and offered to its members again, since the replacement route may
rank better or worse. Members whose best group it was are rescanned. Pair
routes lapse together with their edge.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable

from .domain import Order
from .routing import RoutePlan, plan_best_route

INF = math.inf


@dataclass
class BestGroupEntry:
    group: tuple | None = None
    route: RoutePlan | None = None
    key: float = INF
    avg_extra: float = INF
    refreshed_at: int = 0
    expiry: float = INF

    def __post_init__(self):
        self._rank = (INF, INF, ()) if self.group is None else (self.key, len(self.group), self.group)

    @property
    def empty(self) -> bool:
        return self.group is None

    def rank(self):
        return self._rank


def rank_key(orders: Iterable[Order], route: RoutePlan, alpha: float, beta: float) -> float:
    orders = list(orders)
    k = len(orders)
    return alpha * sum(route.detour[o.id] for o in orders) / k - beta * sum(o.release for o in orders) / k


def enumerate_cliques(adj: dict, node, k_max: int) -> list[tuple]:
    """All cliques of size <= ``k_max`` containing ``node``, as sorted tuples."""
    out = [(node,)]
    if k_max < 2:
        return out
    nbrs = sorted(adj[node])

    def extend(clique: list, cands: list):
        for idx, u in enumerate(cands):
            grown = clique + [u]
            out.append(tuple(sorted(grown)))
            if len(grown) < k_max:
                nu = adj[u]
                extend(grown, [w for w in cands[idx + 1:] if w in nu])

    extend([node], nbrs)
    return out


class ShareGraph:
    """Single-writer pool of pending orders.

    ``model`` is the travel model; ``k_max`` caps clique size (vehicle
    capacity bound). ``grid``/``ring`` optionally restrict neighbour probing
    to orders whose pickup cell lies within ``ring`` cells.
    """

    def __init__(self, model, k_max: int = 3, alpha: float = 1.0, beta: float = 1.0,
                 capacity: int | None = None, grid=None, ring: int | None = None):
        self.model = model
        self.k_max = k_max
        self.alpha = alpha
        self.beta = beta
        self.capacity = capacity if capacity is not None else k_max
        self.grid = grid
        self.ring = ring
        self.now = -math.inf
        self.orders: dict[int, Order] = {}
        self.adj: dict[int, dict[int, int]] = {}
        self.entries: dict[int, BestGroupEntry] = {}
        self._in_best: dict[int, set[int]] = {}
        self._edge_heap: list = []
        self._events: list = []
        self._routes: dict[tuple, RoutePlan | None] = {}
        self._keys: dict[tuple, float] = {}
        self._routes_of: dict[int, set[tuple]] = {}
        self.stats = {"plans": 0, "recomputes": 0}

    # ------------------------------------------------------------------ routes
    def route_for(self, group: tuple) -> RoutePlan | None:
        """Cheapest feasible route of ``group`` at the current time (cached).

        An infeasible group stays infeasible as time advances, and a cached
        route stays the cheapest feasible one until its own expiry.
        """
        cached = self._routes.get(group, False)
        if cached is None:
            return None
        if cached is not False and self.now < cached.expiry:
            return cached
        self.stats["plans"] += 1
        route = plan_best_route([self.orders[i] for i in group], self.model, self.now,
                                capacity=self.capacity, k_max=self.k_max)
        self._routes[group] = route
        if route is not None:
            self._keys[group] = rank_key([self.orders[i] for i in group], route, self.alpha, self.beta)
            if len(group) != 2:
                # pair routes lapse together with their edge
                heapq.heappush(self._events, (route.expiry, group))
        if cached is False:
            for i in group:
                self._routes_of[i].add(group)
        return route

    # --------------------------------------------------------------- entries
    def _set_entry(self, oid: int, entry: BestGroupEntry) -> None:
        old = self.entries.get(oid)
        if old is not None and old.group is not None:
            for m in old.group:
                s = self._in_best.get(m)
                if s is not None:
                    s.discard(oid)
        self.entries[oid] = entry
        if entry.group is not None:
            for m in entry.group:
                self._in_best[m].add(oid)

    def _make_entry(self, group: tuple, route: RoutePlan) -> BestGroupEntry:
        key = self._keys[group]
        return BestGroupEntry(group=group, route=route, key=key,
                              avg_extra=key + self.beta * self.now,
                              refreshed_at=self.now, expiry=route.expiry)

    def _scan(self, oid: int, reset: bool) -> None:
        """Enumerate cliques containing ``oid`` and improve member entries.

        With ``reset`` the entry of ``oid`` is rebuilt from scratch; other
        members are only ever improved.
        """
        self.stats["recomputes"] += 1
        if reset:
            self._set_entry(oid, BestGroupEntry(refreshed_at=self.now))
        for clique in enumerate_cliques(self.adj, oid, self.k_max):
            route = self.route_for(clique)
            if route is not None:
                self._offer(clique, route)

    def _offer(self, group: tuple, route: RoutePlan) -> None:
        """Install ``group`` as best group of every member it beats."""
        rank = (self._keys[group], len(group), group)
        entries = self.entries
        cand = None
        for m in group:
            if rank < entries[m]._rank:
                if cand is None:
                    cand = self._make_entry(group, route)
                self._set_entry(m, cand)

    def _is_clique(self, group: tuple) -> bool:
        adj = self.adj
        if any(m not in adj for m in group):
            return False
        return all(b in adj[a] for i, a in enumerate(group) for b in group[i + 1:])

    def _route_lapsed(self, group: tuple) -> None:
        """The cached route of ``group`` has expired: replan it and update members.

        Only this one candidate changed, so members that did not hold it just
        compare against the replanned route; holders need a full rescan.
        """
        if not self._is_clique(group):
            return
        route = self.route_for(group)
        stale = []
        for m in group:
            e = self.entries[m]
            if e.group == group and e.expiry <= self.now:
                stale.append(m)
        if route is not None:
            self._offer(group, route)
        for m in stale:
            if self.entries[m].expiry <= self.now:
                self._scan(m, reset=True)

    # ------------------------------------------------------------- mutation
    def advance(self, t_now: int) -> None:
        if t_now < self.now:
            raise ValueError(f"time went backwards: {t_now} < {self.now}")
        self.now = t_now

    def insert_order(self, order: Order, t_now: int) -> None:
        """Add ``order``, link shareable neighbours and update best groups."""
        if order.id in self.orders:
            raise KeyError(f"order {order.id} already pooled")
        self.expire(t_now)
        oid = order.id
        self.orders[oid] = order
        self.adj[oid] = {}
        self._in_best[oid] = set()
        self._routes_of[oid] = set()
        self.entries[oid] = BestGroupEntry(refreshed_at=self.now)
        if self.k_max >= 2:
            for j in self._neighbour_candidates(order):
                pair = (oid, j) if oid < j else (j, oid)
                route = self.route_for(pair)
                if route is None:
                    continue
                self.adj[oid][j] = route.expiry
                self.adj[j][oid] = route.expiry
                heapq.heappush(self._edge_heap, (route.expiry, pair))
        if self.grid is not None:
            self.grid.add(oid, order.pickup)
        self._scan(oid, reset=False)

    def _neighbour_candidates(self, order: Order):
        if self.grid is not None and self.ring is not None:
            pool = [j for j in self.grid.within_ring(order.pickup, self.ring) if j in self.orders]
        else:
            pool = list(self.orders)
        slack_o = order.deadline - order.direct - self.now
        out = []
        for j in sorted(pool):
            if j == order.id:
                continue
            other = self.orders[j]
            # the later pickup's detour is at least the pickup-to-pickup cost
            slack = max(slack_o, other.deadline - other.direct - self.now)
            if self.model.cost(order.pickup, other.pickup) >= slack:
                continue
            out.append(j)
        return out

    def _drop_node(self, oid: int) -> None:
        for j in self.adj.pop(oid):
            del self.adj[j][oid]
        for g in self._routes_of.pop(oid):
            self._routes.pop(g, None)
            self._keys.pop(g, None)
            for m in g:
                if m != oid and m in self._routes_of:
                    self._routes_of[m].discard(g)
        self._set_entry(oid, BestGroupEntry())
        del self.entries[oid]
        del self.orders[oid]
        self._in_best.pop(oid)

    def remove_orders(self, group: Iterable[int], cause: str = "departure") -> None:
        """Order departure (members leave) or group expiration (members stay)."""
        group = tuple(sorted(group))
        for m in group:
            if m not in self.orders:
                raise KeyError(f"order {m} is not pooled")
        if cause == "departure":
            cands: set[int] = set()
            for m in group:
                cands |= self._in_best[m]
            for m in group:
                if self.grid is not None and m in self.grid:
                    self.grid.remove(m)
                self._drop_node(m)
            cands -= set(group)
        elif cause == "expiration":
            gs = set(group)
            cands = {i for i in self._in_best[group[0]]
                     if gs <= set(self.entries[i].group or ())}
        else:
            raise ValueError(f"unknown cause {cause!r}")
        # candidates only rescan cliques; neighbour links are left as they are
        for i in sorted(cands):
            if i in self.orders:
                self._scan(i, reset=True)

    def expire(self, t_now: int) -> None:
        """Drop edges and re-evaluate entries that lapse at or before ``t_now``."""
        self.advance(t_now)
        lapsed_pairs = []
        while self._edge_heap and self._edge_heap[0][0] <= t_now:
            exp, (i, j) = heapq.heappop(self._edge_heap)
            if i in self.adj and self.adj[i].get(j) == exp:
                del self.adj[i][j]
                del self.adj[j][i]
                lapsed_pairs.append((i, j))
        cands: set[int] = set()
        for i, j in lapsed_pairs:
            cands |= {o for o in self._in_best[i] if j in (self.entries[o].group or ())}
        for i in sorted(cands):
            if i in self.orders:
                self._scan(i, reset=True)
        while self._events and self._events[0][0] <= t_now:
            _, group = heapq.heappop(self._events)
            self._route_lapsed(group)

    # ---------------------------------------------------------------- queries
    def best_group(self, oid: int) -> BestGroupEntry:
        try:
            return self.entries[oid]
        except KeyError:
            raise KeyError(f"order {oid} is not pooled") from None

    def enumerate_cliques_containing(self, oid: int, k_max: int | None = None) -> list[tuple]:
        if oid not in self.adj:
            raise KeyError(f"order {oid} is not pooled")
        return enumerate_cliques(self.adj, oid, self.k_max if k_max is None else k_max)

    def __contains__(self, oid) -> bool:
        return oid in self.orders

    def __len__(self) -> int:
        return len(self.orders)

    def edges(self) -> list[tuple[int, int, int]]:
        return sorted((i, j, e) for i, nb in self.adj.items() for j, e in nb.items() if i < j)

    def snapshot(self) -> dict:
        return {
            "now": self.now,
            "nodes": sorted(self.orders),
            "edges": [list(e) for e in self.edges()],
            "best": {str(i): {"group": list(e.group) if e.group else None,
                              "avg_extra": None if e.empty else e.key + self.beta * self.now,
                              "expiry": None if e.empty else e.expiry}
                     for i, e in sorted(self.entries.items())},
        }

    def dump_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)
