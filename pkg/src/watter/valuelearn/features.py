"""Per-order MDP state: location one-hots, time slots, demand and supply tallies.

Layout of the ``5 n^2 + 2`` vector::

    [pickup one-hot | dropoff one-hot | release slot, waited slots |
     pending pickups | pending dropoffs | idle workers]
"""
from __future__ import annotations

import numpy as np

DAY_MS = 86_400_000


def state_dim(n: int) -> int:
    return 5 * n * n + 2


class DemandSupply:
    """Running per-cell tallies of pending orders and idle workers."""

    def __init__(self, grid):
        self.grid = grid
        c = grid.n_cells
        self.pickups = np.zeros(c, dtype=np.int64)
        self.dropoffs = np.zeros(c, dtype=np.int64)
        self.idle = np.zeros(c, dtype=np.int64)

    def add_order(self, order, sign: int = 1) -> None:
        self.pickups[self.grid.cell_of(order.pickup)] += sign
        self.dropoffs[self.grid.cell_of(order.dropoff)] += sign

    def remove_order(self, order) -> None:
        self.add_order(order, -1)

    def add_worker(self, loc, sign: int = 1) -> None:
        self.idle[self.grid.cell_of(loc)] += sign

    def remove_worker(self, loc) -> None:
        self.add_worker(loc, -1)

    def environment(self) -> np.ndarray:
        return np.concatenate([self.pickups, self.dropoffs, self.idle]).astype(float)


def featurize(order, t_now: int, grid, env: np.ndarray, slot_ms: int = 10_000) -> np.ndarray:
    """State vector of ``order`` at ``t_now`` given an environment snapshot.

    ``env`` is :meth:`DemandSupply.environment` (or zeros). Locations outside
    the grid are clamped to the nearest cell.
    """
    c = grid.n_cells
    s = np.zeros(2 * c + 2 + 3 * c)
    s[grid.cell_of(order.pickup)] = 1.0
    s[c + grid.cell_of(order.dropoff)] = 1.0
    s[2 * c] = (order.release % DAY_MS) // slot_ms
    s[2 * c + 1] = (t_now - order.release) // slot_ms
    s[2 * c + 2:] = env
    return s


def feature_scale(n: int, slot_ms: int = 10_000, count_scale: float = 10.0) -> np.ndarray:
    """Fixed input scaling that brings every block to roughly unit range."""
    c = n * n
    scale = np.ones(state_dim(n))
    scale[2 * c] = slot_ms / DAY_MS
    scale[2 * c + 1] = slot_ms / 60_000
    scale[2 * c + 2:] = 1.0 / count_scale
    return scale
