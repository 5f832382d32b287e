"""Experience collection in the pooling simulator and value-network updates.

Each epoch replays the training orders through :class:`~watter.simharness.Simulation`
with a :class:`Collector` attached. The collector turns every pending order's
decisions into transitions, explores by flipping free decisions with
probability ``epsilon``, and takes one gradient step after every check.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_states, check_unit_interval
from ..simharness import Agent, SimConfig, Simulation
from ..strategy import Decision, GmmThresholds, ValueNetThresholds
from .features import feature_scale, state_dim
from .network import MLP, Adam
from .replay import DISPATCH, WAIT, Buffer, ReplayMemory, replace_terminate
from .rewards import combined_loss, dispatch_reward, stack_batch

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 4
    warm_epochs: int = 2
    decision_mode: str = "val"  # "val": thresholds from V; "mdp": compare action values
    use_target_loss: bool = True
    omega: float = 0.5
    gamma: float = 1.0
    lr: float = 1e-3
    batch_size: int = 256
    memory_size: int = 100_000
    sync_every: int = 1000
    updates_per_check: int = 1
    epsilon_start: float = 0.3
    epsilon_end: float = 0.01
    hidden: tuple = (128, 128)
    seed: int = 0

    def __post_init__(self):
        if self.decision_mode not in ("val", "mdp"):
            raise ValueError(f"unknown decision mode {self.decision_mode!r}")
        check_unit_interval("omega", self.omega)
        check_unit_interval("epsilon_start", self.epsilon_start)
        check_unit_interval("epsilon_end", self.epsilon_end)
        if self.epochs < 1 or self.warm_epochs < 0:
            raise ValueError("epochs must be >= 1 and warm_epochs >= 0")
        self.hidden = tuple(self.hidden)

    def epsilon(self, epoch: int) -> float:
        if self.epochs <= 1:
            return self.epsilon_start
        frac = epoch / (self.epochs - 1)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class Collector(Agent):
    """Simulation hooks that record transitions and train the network."""

    needs_states = True

    def __init__(self, learner: "ValueFunctionLearner", gmm: GmmThresholds | None, epsilon: float,
                 rng: np.random.Generator, mode: str = "val", train: bool = True):
        self.learner = learner
        self.gmm = gmm
        self.epsilon = epsilon
        self.rng = rng
        self.mode = mode
        self.train = train
        cfg = learner.sim_config_
        self.alpha, self.beta = cfg.alpha, cfg.beta
        self.buffer = Buffer(cfg.beta, cfg.slot_ms)
        self.actions: list[int] = []
        self.sim = None

    def start(self, sim) -> None:
        self.sim = sim

    def _target(self, order) -> float:
        if self.gmm is None or not self.learner.train_config_.use_target_loss:
            return np.nan
        return order.penalty - self.gmm.theta(order)

    def arrive(self, order, t) -> None:
        self.buffer.start(order)

    def decide(self, oid, group, route, decision, t):
        if decision.cause != "threshold":
            return decision  # forced by the waiting-time limit
        dispatch = decision.dispatch
        cause = decision.cause
        if self.mode == "mdp":
            cause = "mdp"
            order = self.sim.pool.orders[oid]
            s = self.sim.state_of(order, t)
            s_next = s.copy()
            s_next[2 * self.sim.grid.n_cells + 1] += 1
            v_next = float(self.learner.value_ms(s_next[None, :])[0])
            wait_value = -self.beta * self.sim.config.slot_ms + self.learner.train_config_.gamma * v_next
            dispatch = dispatch_reward(order.penalty, route.detour[oid], self.alpha) >= wait_value
        if self.epsilon > 0 and self.rng.random() < self.epsilon:
            flipped = bool(self.rng.integers(2))
            if flipped != dispatch:
                # tagged apart so the threshold bound is only checked on rule dispatches
                dispatch, cause = flipped, "explore"
        self.actions.append(int(dispatch))
        return Decision(dispatch, cause, decision.sum_extra, decision.sum_theta)

    def waited(self, oid, t) -> None:
        order = self.sim.pool.orders[oid]
        self.buffer.wait(oid, self.sim.state_of(order, t), t, self.learner.memory_, self._target(order))

    def dispatched(self, group, route, t) -> None:
        for o in group:
            replace_terminate(self.buffer, self.learner.memory_, o.id, self.sim.state_of(o, t), DISPATCH,
                              dispatch_reward(o.penalty, route.detour[o.id], self.alpha), t, self._target(o))

    def expired(self, order, t) -> None:
        # charged up to the last deliverable instant, so the lifecycle totals -beta * p
        replace_terminate(self.buffer, self.learner.memory_, order.id, self.sim.state_of(order, t), WAIT,
                          0.0, order.dead_at, self._target(order))

    def checked(self, t) -> None:
        if self.train:
            for _ in range(self.learner.train_config_.updates_per_check):
                self.learner._update(self.rng)


class ValueFunctionLearner(BaseEstimator):
    """Learns the per-order state value ``V(s)`` used as ``p - theta``.

    ``fit(orders, workers)`` runs the training epochs; ``predict(states)``
    returns values in seconds.
    """

    def __init__(self, sim_config: SimConfig | None = None, train_config: TrainConfig | None = None,
                 gmm=None, model=None):
        self.sim_config = sim_config
        self.train_config = train_config
        self.gmm = gmm
        self.model = model

    def _init(self):
        self.sim_config_ = self.sim_config or SimConfig()
        self.train_config_ = self.train_config or TrainConfig()
        cfg, tc = self.sim_config_, self.train_config_
        self.n_features_in_ = state_dim(cfg.grid_n)
        self.net_ = MLP(self.n_features_in_, tc.hidden, seed=tc.seed,
                        input_scale=feature_scale(cfg.grid_n, cfg.slot_ms))
        self.target_ = self.net_.copy()
        self.opt_ = Adam(self.net_.params, lr=tc.lr)
        self.memory_ = ReplayMemory(tc.memory_size)
        self.n_updates_ = 0
        self.history_ = []

    def _update(self, rng) -> float | None:
        tc = self.train_config_
        if len(self.memory_) < tc.batch_size:
            return None
        batch = self.memory_.sample(rng, tc.batch_size)
        arrays = stack_batch(batch, self.n_features_in_)
        omega = tc.omega if tc.use_target_loss else 1.0
        loss, grads = combined_loss(self.net_, self.target_, *arrays, omega=omega, gamma=tc.gamma)
        self.opt_.step(grads)
        self.n_updates_ += 1
        if self.n_updates_ % tc.sync_every == 0:
            self.target_.load_params(self.net_)
        return loss

    def value_ms(self, states) -> np.ndarray:
        return 1000.0 * self.net_.forward(states)

    def thresholds(self) -> ValueNetThresholds:
        check_is_fitted(self, "net_")
        return ValueNetThresholds(self.value_ms)

    def run_epoch(self, orders, workers, epoch: int, train: bool = True, epsilon: float | None = None):
        tc, cfg = self.train_config_, self.sim_config_
        rng = np.random.default_rng([tc.seed, epoch])
        gmm = GmmThresholds(self.gmm) if self.gmm is not None else None
        warm = epoch < tc.warm_epochs
        if warm and gmm is None:
            raise ValueError("warm epochs need a fitted threshold optimizer")
        source = gmm if warm or tc.decision_mode == "mdp" else self.thresholds()
        mode = "val" if warm else tc.decision_mode
        eps = tc.epsilon(epoch) if epsilon is None else epsilon
        agent = Collector(self, gmm, eps, rng, mode=mode, train=train)
        sim_cfg = SimConfig.from_dict({**cfg.to_dict(), "strategy": "expect"})
        sim = Simulation(orders, workers, sim_cfg, self.model, thresholds=source, agent=agent)
        result = sim.run()
        if agent.buffer.open:
            raise AssertionError("open transitions left after the episode")
        totals = agent.buffer.totals
        mean_reward = float(np.mean(list(totals.values()))) / 1000.0 if totals else 0.0
        rec = {"epoch": epoch, "warm": warm, "epsilon": eps, "mean_reward_s": mean_reward,
               "updates": self.n_updates_, "memory": len(self.memory_),
               "mean_extra_time_s": result.report["mean_extra_time_s"]}
        self.history_.append(rec)
        logger.info("epoch %d: %s", epoch, rec)
        return agent, result

    def fit(self, orders, workers=None):
        if not orders:
            raise ValueError("no training orders")
        self._init()
        workers = list(workers) if workers is not None else []
        for epoch in range(self.train_config_.epochs):
            self.run_epoch(orders, workers, epoch)
        return self

    def predict(self, states):
        check_is_fitted(self, "net_")
        return self.net_.forward(check_states(states, self.n_features_in_))

    def config_dict(self) -> dict:
        return {"sim": self.sim_config_.to_dict(), "train": asdict(self.train_config_)}
