"""Accumulated reward of an order lifecycle and the combined value-learning loss."""
from __future__ import annotations

import numpy as np

from .._validation import check_unit_interval


def dispatch_reward(p: int, t_d: int, alpha: float = 1.0) -> float:
    return p - alpha * t_d


def accumulated_reward(p: int, t_r: int | None = None, t_d: int | None = None,
                       dispatched: bool = True, alpha: float = 1.0, beta: float = 1.0,
                       gamma: float = 1.0, slot_ms: int = 10_000) -> float:
    """Discounted sum of a lifecycle's rewards.

    Waiting costs ``beta * slot`` per full slot plus the leftover fraction; an
    expired order waited its maximum response time ``p``. At ``gamma = 1``
    this is ``p - t_e`` when dispatched and ``-beta * p`` when expired.
    """
    if not dispatched:
        t_r, terminal = p, 0.0
    else:
        if t_r is None or t_d is None:
            raise ValueError("a dispatched outcome needs t_r and t_d")
        terminal = dispatch_reward(p, t_d, alpha)
    m, rest = divmod(t_r, slot_ms)
    if gamma == 1.0:
        return -beta * t_r + terminal
    wait = -beta * slot_ms * sum(gamma ** k for k in range(m)) - beta * rest * gamma ** m
    return wait + gamma ** (t_r / slot_ms) * terminal


def stack_batch(batch, n_features: int):
    """Arrays for :func:`combined_loss` from a list of transitions (rewards in s)."""
    B = len(batch)
    S = np.empty((B, n_features))
    S2 = np.zeros((B, n_features))
    r = np.empty(B)
    steps = np.zeros(B)
    done = np.zeros(B, dtype=bool)
    y_tg = np.empty(B)
    for i, tr in enumerate(batch):
        S[i] = tr.state
        r[i] = tr.reward / 1000.0
        done[i] = tr.terminal
        if not tr.terminal:
            S2[i] = tr.next_state
            steps[i] = tr.steps
        y_tg[i] = tr.target / 1000.0
    return S, r, S2, done, steps, y_tg


def combined_loss(net, target_net, S, r, S2, done, steps, y_tg, omega: float = 0.5,
                  gamma: float = 1.0, with_grad: bool = True):
    """``omega * TD error^2 + (1 - omega) * target error^2``, averaged.

    Rows with a ``nan`` target contribute to the TD part only. Returns
    ``(loss, grads)``; gradients are taken through ``net`` only.
    """
    check_unit_interval("omega", omega)
    v, acts = net.forward(S, keep=True)
    y_td = r.copy()
    live = ~done
    if live.any():
        y_td[live] += gamma ** steps[live] * target_net.forward(S2[live])
    has_tg = ~np.isnan(y_tg)
    n = len(v)
    e_td = y_td - v
    e_tg = np.where(has_tg, y_tg - v, 0.0)
    n_tg = max(int(has_tg.sum()), 1)
    loss = omega * float(e_td @ e_td) / n + (1 - omega) * float(e_tg @ e_tg) / n_tg
    if not with_grad:
        return loss, None
    d_out = -2.0 * (omega * e_td / n + (1 - omega) * e_tg / n_tg)
    return loss, net.backward(acts, d_out)
