"""Orders, workers, dispatch records and the per-order metric formulas.

Times are integer milliseconds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class Order:
    id: int
    pickup: object
    dropoff: object
    release: int
    deadline: int
    wait_limit: int
    direct: int
    riders: int = 1

    def __post_init__(self):
        if self.riders < 1:
            raise ValueError(f"order {self.id}: rider count must be >= 1")
        if self.wait_limit < 0:
            raise ValueError(f"order {self.id}: negative waiting-time limit")
        if self.deadline < self.release + self.direct:
            raise ValueError(f"order {self.id}: deadline precedes earliest possible drop-off")

    @property
    def penalty(self) -> int:
        return self.deadline - self.release - self.direct

    @property
    def timeout_at(self) -> int:
        return self.release + self.wait_limit

    @property
    def dead_at(self) -> int:
        """First instant at which the order can no longer be delivered on time."""
        return self.release + self.penalty


@dataclass
class Worker:
    id: int
    location: object
    capacity: int
    idle: bool = True
    free_at: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"worker {self.id}: capacity must be >= 1")


@dataclass(frozen=True)
class ServedRecord:
    order_id: int
    t_r: int
    t_d: int
    t_e: float
    worker_id: int
    group_id: int = -1


@dataclass(frozen=True)
class RejectedRecord:
    order_id: int
    penalty: int


def extra_time(t_d, t_r, alpha: float = 1.0, beta: float = 1.0):
    if t_d < 0 or t_r < 0:
        raise ValueError("detour and response times must be non-negative")
    return alpha * t_d + beta * t_r


def max_response_time(order: Order) -> int:
    return order.penalty


def objective(served: Iterable[ServedRecord], rejected: Iterable[RejectedRecord]):
    """Total extra time of served orders plus penalties of rejected ones."""
    seen: set[int] = set()
    total = 0
    for rec in served:
        if rec.order_id in seen:
            raise ValueError(f"duplicate order id {rec.order_id}")
        seen.add(rec.order_id)
        total += rec.t_e
    for rec in rejected:
        if rec.order_id in seen:
            raise ValueError(f"duplicate order id {rec.order_id}")
        seen.add(rec.order_id)
        total += rec.penalty
    return total


def make_order(oid, pickup, dropoff, release, direct, tau_scale=1.6, eta_scale=0.8, riders=1) -> Order:
    """Order with deadline ``t + tau_scale * direct`` and window ``eta_scale * direct``."""
    return Order(id=oid, pickup=pickup, dropoff=dropoff, release=int(release),
                 deadline=int(release) + round(tau_scale * direct),
                 wait_limit=round(eta_scale * direct), direct=int(direct), riders=riders)
