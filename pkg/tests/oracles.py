"""Brute-force reference implementations used as test oracles."""
import itertools
import math
import random

import numpy as np

from watter.domain import make_order
from watter.poolgraph import ShareGraph, rank_key
from watter.routing import DROPOFF, PICKUP, plan_best_route
from watter.valuelearn import MLP, combined_loss


def brute_route(group, model, t_now, capacity=math.inf):
    """Cheapest feasible stop order by full enumeration; ties to the first in tag order.

    Returns ``(cost, stops)`` or ``None``.
    """
    orders = sorted(group, key=lambda o: o.id)
    k = len(orders)
    tags = list(range(2 * k))  # j < k: pickup of orders[j]; k + j: its drop-off
    best = None
    for perm in itertools.permutations(tags):
        picked, load, c, prev, sub, ok = set(), 0, 0, None, {}, True
        for s in perm:
            o = orders[s % k]
            if s < k:
                picked.add(s)
                load += o.riders
                if load > capacity:
                    ok = False
                    break
                loc = o.pickup
            else:
                if s - k not in picked:
                    ok = False
                    break
                load -= o.riders
                loc = o.dropoff
            if prev is not None:
                c += model.cost(prev, loc)
            prev = loc
            if s >= k:
                sub[o.id] = c
        if not ok or any(t_now + sub[o.id] >= o.deadline for o in orders):
            continue
        if best is None or c < best[0]:
            stops = tuple((orders[s % k].id, PICKUP if s < k else DROPOFF) for s in perm)
            best = (c, stops)
    return best


class ShadowPool:
    """Independent pool bookkeeping: edges from pair routes, best groups by full scan."""

    def __init__(self, model, k_max=3, alpha=1.0, beta=1.0, capacity=None):
        self.model = model
        self.k_max = k_max
        self.alpha = alpha
        self.beta = beta
        self.capacity = capacity if capacity is not None else k_max
        self.orders = {}
        self.edges = {}  # (i, j) -> expiry
        self._plans = {}

    def plan(self, ids, t):
        key = (ids, t)
        if key not in self._plans:
            self._plans[key] = plan_best_route([self.orders[i] for i in ids], self.model, t,
                                               capacity=self.capacity)
        return self._plans[key]

    def insert(self, order, t):
        self.expire(t)
        self.orders[order.id] = order
        for j in self.orders:
            if j != order.id:
                pair = tuple(sorted((j, order.id)))
                r = self.plan(pair, t)
                if r is not None:
                    self.edges[pair] = r.expiry

    def remove(self, ids):
        for i in ids:
            del self.orders[i]
        self.edges = {e: x for e, x in self.edges.items() if e[0] in self.orders and e[1] in self.orders}

    def expire(self, t):
        self.edges = {e: x for e, x in self.edges.items() if x > t}

    def best(self, t):
        pend = sorted(self.orders)
        best = {i: (math.inf, math.inf, ()) for i in pend}
        for k in range(1, self.k_max + 1):
            for group in itertools.combinations(pend, k):
                if any(p not in self.edges for p in itertools.combinations(group, 2)):
                    continue
                r = self.plan(group, t)
                if r is None:
                    continue
                cand = (rank_key([self.orders[i] for i in group], r, self.alpha, self.beta), k, group)
                for i in group:
                    best[i] = min(best[i], cand)
        return best


def run_against_shadow(seed, steps, model, max_pending=25, check_every=1):
    """Random insert/remove/expire events, comparing every best group and edge with :class:`ShadowPool`.

    Returns the number of comparisons made.
    """
    rng = random.Random(seed)
    g = ShareGraph(model, k_max=3)
    shadow = ShadowPool(model, k_max=3)
    t, nid, checks = 0, 0, 0
    for step in range(steps):
        ev = rng.random()
        if (ev < 0.5 and len(g) < max_pending) or len(g) == 0:
            p = (104.0 + rng.random() * 0.006, 30.6 + rng.random() * 0.006)
            d = (104.03 + rng.random() * 0.006, 30.62 + rng.random() * 0.006)
            o = make_order(nid, p, d, t, model.cost(p, d), tau_scale=2.0)
            nid += 1
            g.insert_order(o, t)
            shadow.insert(o, t)
        elif ev < 0.65:
            i = rng.choice(sorted(g.orders))
            g.remove_orders([i])
            shadow.remove([i])
        elif ev < 0.75:
            grp = g.best_group(rng.choice(sorted(g.orders))).group
            if grp:
                g.remove_orders(grp)
                shadow.remove(grp)
        else:
            t += rng.randint(0, 30_000)
            g.expire(t)
            shadow.expire(t)
            dead = [i for i in g.orders if g.entries[i].empty]
            if dead:
                g.remove_orders(dead)
                shadow.remove(dead)
        if step % check_every == 0:
            want = shadow.best(g.now)
            assert set(want) == set(g.orders)
            for i in g.orders:
                assert g.best_group(i).rank() == want[i], (seed, step, i)
            assert {(a, b) for a, b, _ in g.edges()} == set(shadow.edges)
            checks += 1
    return checks


def random_batch(rng, n_in=6, B=12):
    S = rng.normal(size=(B, n_in))
    S2 = rng.normal(size=(B, n_in))
    r = rng.normal(size=B)
    done = rng.random(B) < 0.3
    steps = rng.integers(1, 4, B).astype(float)
    y_tg = np.where(rng.random(B) < 0.2, np.nan, rng.normal(size=B))
    return S, r, S2, done, steps, y_tg


def finite_difference_error(seed):
    """Relative error between analytic loss gradients and central differences on a random batch."""
    rng = np.random.default_rng(seed)
    net = MLP(6, (8, 8), seed=seed)
    tgt = net.copy()
    tgt.set_flat_params(tgt.flat_params() + rng.normal(0, 0.1, tgt.flat_params().size))
    batch = random_batch(rng)
    omega = float(rng.uniform())
    _, grads = combined_loss(net, tgt, *batch, omega=omega, gamma=0.95)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta = net.flat_params()
    numeric = np.zeros_like(theta)
    h = 1e-6
    for i in range(theta.size):
        for sign in (1, -1):
            bumped = theta.copy()
            bumped[i] += sign * h
            net.set_flat_params(bumped)
            numeric[i] += sign * combined_loss(net, tgt, *batch, omega=omega, gamma=0.95, with_grad=False)[0]
    numeric /= 2 * h
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
