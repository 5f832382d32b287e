"""Experience storage: the open-transition buffer and the bounded replay memory.

A wait decision opens a transition whose next state and reward are only known
at the order's next decision (or termination). Rewards are charged for the
time elapsed since the previous charge, so at ``gamma = 1`` the rewards of one
order always sum to its accumulated reward.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

WAIT, DISPATCH = 0, 1


@dataclass
class Transition:
    order_id: int
    state: np.ndarray
    action: int
    reward: float  # ms
    next_state: np.ndarray | None  # None marks a terminal transition
    steps: float  # elapsed time in slots, the exponent for gamma
    target: float  # p - theta (ms), nan when unknown

    @property
    def terminal(self) -> bool:
        return self.next_state is None


@dataclass
class _Open:
    state: np.ndarray
    action: int
    opened_at: int
    target: float


class ReplayMemory:
    def __init__(self, capacity: int = 100_000):
        self.items: deque[Transition] = deque(maxlen=capacity)

    def push(self, tr: Transition) -> None:
        self.items.append(tr)

    def __len__(self) -> int:
        return len(self.items)

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        idx = rng.integers(len(self.items), size=min(batch_size, len(self.items)))
        return [self.items[i] for i in idx]


class Buffer:
    """At most one open wait transition per live order, plus reward accounting.

    ``charged_until[oid]`` is the instant up to which waiting has already been
    charged; it starts at the release time.
    """

    def __init__(self, beta: float = 1.0, slot_ms: int = 10_000):
        self.beta = beta
        self.slot_ms = slot_ms
        self.open: dict[int, _Open] = {}
        self.charged_until: dict[int, int] = {}
        self.totals: dict[int, float] = {}

    def start(self, order) -> None:
        self.charged_until[order.id] = order.release
        self.totals[order.id] = 0.0

    def _close(self, oid: int, next_state, t_now: int, memory: ReplayMemory) -> None:
        op = self.open.pop(oid)
        r = -self.beta * (t_now - self.charged_until[oid])
        self.totals[oid] += r
        memory.push(Transition(oid, op.state, op.action, r, next_state,
                               (t_now - op.opened_at) / self.slot_ms, op.target))
        self.charged_until[oid] = t_now

    def wait(self, oid: int, state, t_now: int, memory: ReplayMemory, target: float = np.nan) -> None:
        if oid in self.open:
            self._close(oid, state, t_now, memory)
        self.open[oid] = _Open(state, WAIT, t_now, target)

    def pending(self, oid: int) -> bool:
        return oid in self.open


def replace_terminate(buffer: Buffer, memory: ReplayMemory, oid: int, state, action: int,
                      reward: float, t_now: int, target: float = np.nan) -> None:
    """Terminate ``oid``: patch its open transition to lead to ``state``, then
    flush it followed by the terminal ``(state, action, reward)``.

    Without an open transition, the waiting since release is folded into the
    terminal reward.
    """
    if buffer.pending(oid):
        buffer._close(oid, state, t_now, memory)
    else:
        reward -= buffer.beta * (t_now - buffer.charged_until[oid])
    buffer.totals[oid] += reward
    memory.push(Transition(oid, state, action, reward, None, 0.0, target))
    del buffer.charged_until[oid]
