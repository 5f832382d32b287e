"""Dispatch decisions for a pooled group and the per-order threshold providers.

Thresholds are float milliseconds.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import Order
from .routing import RoutePlan, member_extra_times

KINDS = ("online", "timeout", "threshold")


@dataclass(frozen=True)
class Decision:
    dispatch: bool
    cause: str = ""  # "online" | "timeout" | "expiry" | "threshold" | ""
    sum_extra: float = math.nan
    sum_theta: float = math.nan


def earliest_timeout(group: Sequence[Order]) -> int:
    return min(o.timeout_at for o in group)


def make_decision(kind: str, group: Sequence[Order], route: RoutePlan, t_s: int,
                  thresholds: Mapping[int, float] | None = None, alpha: float = 1.0,
                  beta: float = 1.0, expiry_guard: int | None = None,
                  guard_on: str = "group") -> Decision:
    """Whether to dispatch ``group`` along ``route`` at ``t_s``.

    ``expiry_guard``, when given, also dispatches once waiting another
    ``expiry_guard`` ms (the next check) would be too late: for the group's
    route when ``guard_on == "group"``, or for any member's own direct ride
    when ``guard_on == "order"``.
    The threshold test compares sums, which is the mean comparison for a
    fixed group size without the rounding.
    """
    if kind == "online":
        return Decision(True, "online")
    if kind not in KINDS:
        raise ValueError(f"unknown strategy {kind!r}")
    if t_s > earliest_timeout(group):
        return Decision(True, "timeout")
    if expiry_guard is not None:
        if guard_on == "group":
            last = route.expiry
        elif guard_on == "order":
            last = min(o.dead_at for o in group)
        else:
            raise ValueError(f"unknown guard target {guard_on!r}")
        if last <= t_s + expiry_guard:
            return Decision(True, "expiry")
    if kind == "timeout":
        return Decision(False)
    if thresholds is None:
        raise ValueError("threshold strategy needs thresholds")
    try:
        sum_theta = sum(thresholds[o.id] for o in group)
    except KeyError as e:
        raise KeyError(f"no threshold for order {e.args[0]}") from None
    sum_extra = sum(member_extra_times(group, route, t_s, alpha, beta).values())
    return Decision(sum_extra <= sum_theta, "threshold", sum_extra, sum_theta)


def clamp_theta(theta: float, p: float) -> float:
    return min(max(theta, 0.0), float(p))


class ThresholdSource:
    """Provides ``theta`` (ms) for an order; ``state`` is used by learned sources."""

    needs_state = False

    def theta(self, order: Order, state=None) -> float:
        raise NotImplementedError

    def batch_theta(self, orders, states) -> list[float]:
        return [self.theta(o, s) for o, s in zip(orders, states)]


class FixedThresholds(ThresholdSource):
    def __init__(self, table: Mapping[int, float]):
        self.table = dict(table)

    def theta(self, order, state=None):
        try:
            return clamp_theta(self.table[order.id], order.penalty)
        except KeyError:
            raise KeyError(f"no threshold for order {order.id}") from None

    def to_csv(self, path) -> None:
        save_threshold_table(path, self.table)

    @classmethod
    def from_csv(cls, path) -> "FixedThresholds":
        return cls(load_threshold_table(path))


class GmmThresholds(ThresholdSource):
    """Optimal expected threshold from a fitted :class:`ThresholdOptimizer`.

    The optimizer works in seconds; results are cached per penalty.
    """

    def __init__(self, optimizer):
        self.optimizer = optimizer
        self._cache: dict[int, float] = {}

    def theta_for_penalty(self, p_ms: int) -> float:
        th = self._cache.get(p_ms)
        if th is None:
            th = float(self.optimizer.predict([p_ms / 1000.0])[0]) * 1000.0
            th = self._cache[p_ms] = clamp_theta(th, p_ms)
        return th

    def theta(self, order, state=None):
        return self.theta_for_penalty(order.penalty)


class ValueNetThresholds(ThresholdSource):
    """``theta = clamp(p - V(s), 0, p)``; ``value_fn`` maps a state matrix to values in ms."""

    needs_state = True

    def __init__(self, value_fn):
        self.value_fn = value_fn

    def theta(self, order, state=None):
        if state is None:
            raise ValueError("value-net thresholds need the order's state")
        return self.batch_theta([order], np.asarray(state, dtype=float)[None, :])[0]

    def batch_theta(self, orders, states) -> list[float]:
        values = self.value_fn(states)
        return [clamp_theta(o.penalty - float(v), o.penalty) for o, v in zip(orders, values)]


def threshold_of(order: Order, source: ThresholdSource | None, state=None) -> float:
    if source is None:
        raise ValueError("threshold source is not initialised")
    return source.theta(order, state)


def save_threshold_table(path, table: Mapping[int, float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["order_id", "theta_seconds"])
        for oid in sorted(table):
            w.writerow([oid, repr(table[oid] / 1000.0)])


def load_threshold_table(path) -> dict[int, float]:
    with open(path, newline="") as fh:
        return {int(row["order_id"]): float(row["theta_seconds"]) * 1000.0 for row in csv.DictReader(fh)}
