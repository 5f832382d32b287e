"""Event loop of the pooling engine: arrivals, periodic checks, dispatch, metrics.

Arrivals insert into the pool; every ``check_period`` the pending orders are
visited in id order, each one's best group is judged by the strategy and, on
dispatch, handed to the nearest idle worker able to carry it.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .domain import Order, RejectedRecord, ServedRecord, Worker, make_order, objective
from .poolgraph import ShareGraph
from .spatial import GeodesicModel, GridIndex, bbox_of, nearest_idle_worker
from .strategy import make_decision

logger = logging.getLogger(__name__)

STRATEGIES = {"online": "online", "timeout": "timeout", "expect": "threshold", "threshold": "threshold"}
LOG_COLUMNS = ["time_ms", "event", "order_id", "group_id", "worker_id", "t_r", "t_d", "t_e",
               "p", "theta", "cause", "travel_ms", "direct_ms"]


@dataclass
class SimConfig:
    strategy: str = "expect"
    alpha: float = 1.0
    beta: float = 1.0
    tau_scale: float = 1.6
    eta_scale: float = 0.8
    k_max: int = 3
    n_workers: int = 300
    grid_n: int = 10
    slot_s: float = 10.0
    check_period_s: float = 10.0
    speed_mps: float = 10.0
    seed: int = 0
    include_approach: bool = False
    timeout_expiry_guard: bool = True
    guard_on: str = "order"
    threshold_expiry_guard: bool = False
    neighbour_ring: int | None = 2
    penalty_factor: float = 10.0
    record_timing: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        for name in ("tau_scale", "eta_scale", "slot_s", "check_period_s", "speed_mps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tau_scale <= 1:
            raise ValueError("tau_scale must exceed 1 so deadlines follow the direct trip")
        if self.k_max < 1 or self.n_workers < 0 or self.grid_n < 1:
            raise ValueError("k_max and grid_n must be >= 1, n_workers >= 0")

    @property
    def kind(self) -> str:
        return STRATEGIES[self.strategy]

    @property
    def check_ms(self) -> int:
        return round(self.check_period_s * 1000)

    @property
    def slot_ms(self) -> int:
        return round(self.slot_s * 1000)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimResult:
    report: dict
    log: list = field(default_factory=list)
    served: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    def log_csv(self) -> str:
        return format_event_log(self.log)

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=True)


# --------------------------------------------------------------- workloads
def generate_workload(n_orders: int = 5000, duration_s: float = 3600.0, seed: int = 0,
                      center=(104.06, 30.66), n_hotspots: int = 8, spread_deg: float = 0.05,
                      hotspot_sd_deg: float = 0.004, trip_km=(0.8, 2.5),
                      city_seed: int = 0) -> list[tuple]:
    """Synthetic order rows ``(release_s, plon, plat, dlon, dlat)``.

    Pickups and drop-offs cluster around a few hotspots so that trips share
    corridors, and releases are uniform over ``duration_s``. The hotspot
    layout depends only on ``city_seed``, so different ``seed`` values are
    different days in the same city.
    """
    hubs = np.asarray(center) + np.random.default_rng(city_seed).uniform(
        -spread_deg, spread_deg, size=(n_hotspots, 2))
    rng = np.random.default_rng(seed)
    rows = []
    releases = np.sort(rng.uniform(0.0, duration_s, size=n_orders))
    km_per_deg = 111.0
    for t in releases:
        while True:
            a, b = rng.choice(n_hotspots, size=2, replace=False)
            p = hubs[a] + rng.normal(0.0, hotspot_sd_deg, size=2)
            d = hubs[b] + rng.normal(0.0, hotspot_sd_deg, size=2)
            km = math.hypot((d[0] - p[0]) * math.cos(math.radians(p[1])), d[1] - p[1]) * km_per_deg
            if trip_km[0] <= km <= trip_km[1]:
                break
        rows.append((round(float(t), 3), round(float(p[0]), 6), round(float(p[1]), 6),
                     round(float(d[0]), 6), round(float(d[1]), 6)))
    return rows


def write_orders_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["release_time_s", "pickup_lon", "pickup_lat", "dropoff_lon", "dropoff_lat"])
        w.writerows(rows)


@dataclass
class IngestStats:
    rows: int = 0
    skipped: int = 0
    zero_cost: int = 0


def orders_from_rows(rows, model, config: SimConfig, stats: IngestStats | None = None) -> list[Order]:
    """Build orders from ``(release_s, plon, plat, dlon, dlat[, riders])`` rows, sorted by release."""
    stats = stats if stats is not None else IngestStats()
    parsed = []
    for row in rows:
        stats.rows += 1
        try:
            t = round(float(row[0]) * 1000)
            p = (float(row[1]), float(row[2]))
            d = (float(row[3]), float(row[4]))
            riders = int(row[5]) if len(row) > 5 and row[5] not in ("", None) else 1
            if not all(math.isfinite(v) for v in (*p, *d)) or t < 0 or riders < 1:
                raise ValueError
        except (ValueError, TypeError, IndexError):
            stats.skipped += 1
            continue
        parsed.append((t, p, d, riders))
    parsed.sort(key=lambda r: r[0])
    orders = []
    for t, p, d, riders in parsed:
        direct = model.cost(p, d)
        if direct <= 0:
            stats.zero_cost += 1
            continue
        orders.append(make_order(len(orders), p, d, t, direct, config.tau_scale, config.eta_scale, riders))
    return orders


def ingest_orders(path, config: SimConfig, model=None, stats: IngestStats | None = None) -> list[Order]:
    """Read an order CSV (header row, then release_time_s, pickup/dropoff lon/lat[, riders])."""
    model = model if model is not None else GeodesicModel(config.speed_mps)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        return orders_from_rows(reader, model, config, stats)


def generate_workers(orders, m: int, k_max: int = 3, seed: int = 0) -> list[Worker]:
    """``m`` workers at pickups drawn with replacement; capacities uniform on ``[2, k_max]``."""
    if m == 0:
        return []
    if not orders:
        raise ValueError("cannot place workers without orders")
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(orders), size=m)
    caps = rng.integers(2, max(k_max, 2) + 1, size=m)
    return [Worker(i, orders[int(j)].pickup, int(c)) for i, (j, c) in enumerate(zip(picks, caps))]


# ---------------------------------------------------------------- dispatch
@dataclass(frozen=True)
class Assignment:
    worker_id: int
    approach: int
    travel: int
    free_at: int


def assign_worker(group, route, workers: dict, t_now: int, model, config: SimConfig,
                  index: GridIndex | None = None) -> Assignment | None:
    """Nearest idle worker that can carry the route's peak load, or ``None``.

    With ``include_approach`` the members' deadlines are re-checked with the
    worker's travel to the first stop added.
    """
    first = route.locations[0]
    wid = nearest_idle_worker(index, first, workers, model,
                              accept=lambda w: workers[w].capacity >= route.peak_load)
    if wid is None:
        return None
    approach = model.cost(workers[wid].location, first)
    if config.include_approach:
        for o in group:
            if t_now + approach + route.sub_cost[o.id] >= o.deadline:
                return None
    travel = approach + route.total_cost
    return Assignment(wid, approach, travel, t_now + travel)


def unified_cost(served, rejected_orders, worker_travel: int, penalty_factor: float = 10.0):
    """Worker travel plus ``penalty_factor`` times the direct cost of each rejected order."""
    return worker_travel + penalty_factor * sum(o.direct for o in rejected_orders)


# -------------------------------------------------------------------- loop
class Agent:
    """Hooks used by value training; the base class leaves decisions untouched."""

    needs_states = False

    def start(self, sim) -> None:
        pass

    def arrive(self, order, t) -> None:
        pass

    def decide(self, oid, group, route, decision, t):
        return decision

    def waited(self, oid, t) -> None:
        pass

    def dispatched(self, group, route, t) -> None:
        pass

    def expired(self, order, t) -> None:
        pass

    def checked(self, t) -> None:
        pass


class Simulation:
    def __init__(self, orders, workers, config: SimConfig, model=None, thresholds=None,
                 agent: Agent | None = None, bbox=None):
        prev = -math.inf
        for o in orders:
            if o.release < prev:
                raise ValueError("orders must be sorted by release time")
            prev = o.release
        self.orders = list(orders)
        self.config = config
        self.model = model if model is not None else GeodesicModel(config.speed_mps)
        self.thresholds = thresholds
        self.agent = agent or Agent()
        if config.kind == "threshold" and thresholds is None:
            raise ValueError("the threshold strategy needs a threshold source")
        self.workers = {w.id: Worker(w.id, w.location, w.capacity) for w in workers}
        geodesic = getattr(self.model, "mode", "") == "geodesic"
        self.grid = None
        self.worker_index = None
        ring = None
        if geodesic and self.orders:
            if bbox is None:
                pts = [o.pickup for o in self.orders] + [o.dropoff for o in self.orders]
                pts += [w.location for w in self.workers.values()]
                bbox = bbox_of(pts)
            self.grid = GridIndex(bbox, config.grid_n)
            self.worker_index = GridIndex(bbox, config.grid_n)
            for w in self.workers.values():
                self.worker_index.add(w.id, w.location)
            ring = config.neighbour_ring
        pool_grid = GridIndex(bbox, config.grid_n) if (ring is not None and self.grid is not None) else None
        self.pool = ShareGraph(self.model, config.k_max, config.alpha, config.beta,
                               capacity=config.k_max, grid=pool_grid, ring=ring)
        self.env = None
        if self.grid is not None:
            from .valuelearn.features import DemandSupply
            self.env = DemandSupply(self.grid)
            for w in self.workers.values():
                self.env.add_worker(w.location)
        self.busy: list = []
        self.log: list[list] = []
        self.served: list[ServedRecord] = []
        self.rejected: list[RejectedRecord] = []
        self.rejected_orders: list[Order] = []
        self.worker_travel = 0
        self.causes: dict[str, int] = {}
        self.group_seq = 0
        self.env_snapshot = None
        self._theta_cache: dict[int, float] = {}
        self.now = 0

    # -- helpers
    def _emit(self, t, event, oid="", gid="", wid="", t_r="", t_d="", t_e="", p="", theta="",
              cause="", travel="", direct=""):
        self.log.append([t, event, oid, gid, wid, t_r, t_d, t_e, p, theta, cause, travel, direct])

    def state_of(self, order, t):
        from .valuelearn.features import featurize
        env = self.env_snapshot if self.env_snapshot is not None else np.zeros(3 * self.grid.n_cells)
        return featurize(order, t, self.grid, env, self.config.slot_ms)

    def _thetas(self, group, t):
        src = self.thresholds
        out = {}
        missing = [o for o in group if o.id not in self._theta_cache]
        if missing:
            if getattr(src, "needs_state", False):
                states = np.stack([self.state_of(o, t) for o in missing])
                vals = src.batch_theta(missing, states)
            else:
                vals = [src.theta(o) for o in missing]
            for o, v in zip(missing, vals):
                self._theta_cache[o.id] = float(v)
        for o in group:
            out[o.id] = self._theta_cache[o.id]
        return out

    def _release_workers(self, t):
        while self.busy and self.busy[0][0] <= t:
            _, wid = heapq.heappop(self.busy)
            w = self.workers[wid]
            w.idle = True
            if self.worker_index is not None:
                self.worker_index.add(wid, w.location)
            if self.env is not None:
                self.env.add_worker(w.location)

    def _reject(self, order, t, cause):
        self.pool.remove_orders([order.id], "departure")
        if self.env is not None:
            self.env.remove_order(order)
        self.rejected.append(RejectedRecord(order.id, order.penalty))
        self.rejected_orders.append(order)
        self._emit(t, "reject", order.id, p=order.penalty, cause=cause, direct=order.direct)
        self.agent.expired(order, t)

    def _dispatch(self, group, route, asg: Assignment, t, decision, thetas):
        cfg = self.config
        gid = self.group_seq
        self.group_seq += 1
        self.agent.dispatched(group, route, t)
        self.pool.remove_orders([o.id for o in group], "departure")
        w = self.workers[asg.worker_id]
        w.idle = False
        w.free_at = asg.free_at
        if self.worker_index is not None:
            self.worker_index.remove(w.id)
        if self.env is not None:
            self.env.remove_worker(w.location)
            for o in group:
                self.env.remove_order(o)
        w.location = route.locations[-1]
        heapq.heappush(self.busy, (asg.free_at, w.id))
        self.worker_travel += asg.travel
        self.causes[decision.cause] = self.causes.get(decision.cause, 0) + 1
        for o in group:
            t_r, t_d = t - o.release, route.detour[o.id]
            t_e = cfg.alpha * t_d + cfg.beta * t_r
            self.served.append(ServedRecord(o.id, t_r, t_d, t_e, w.id, gid))
            theta = repr(thetas[o.id]) if thetas is not None else ""
            self._emit(t, "dispatch", o.id, gid, w.id, t_r, t_d, repr(float(t_e)), o.penalty, theta,
                       decision.cause, "", o.direct)
        self._emit(t, "assign", "", gid, w.id, travel=asg.travel, cause=decision.cause)

    def _check(self, t):
        cfg = self.config
        self._release_workers(t)
        self.pool.expire(t)
        if self.env is not None and (getattr(self.thresholds, "needs_state", False) or self.agent.needs_states):
            self.env_snapshot = self.env.environment()
        self._theta_cache.clear()
        guard = None
        if cfg.kind == "timeout" and cfg.timeout_expiry_guard:
            guard = cfg.check_ms
        elif cfg.kind == "threshold" and cfg.threshold_expiry_guard:
            guard = cfg.check_ms
        for oid in sorted(self.pool.orders):
            if oid not in self.pool:
                continue
            order = self.pool.orders[oid]
            entry = self.pool.best_group(oid)
            if entry.empty:
                # the singleton is feasible until the order's last chance, so
                # an empty entry means it can no longer be delivered in time
                self._reject(order, t, "expired")
                continue
            group = [self.pool.orders[i] for i in entry.group]
            thetas = self._thetas(group, t) if cfg.kind == "threshold" else None
            decision = make_decision(cfg.kind, group, entry.route, t, thetas, cfg.alpha, cfg.beta, guard,
                                     cfg.guard_on)
            decision = self.agent.decide(oid, group, entry.route, decision, t)
            if decision.dispatch:
                asg = assign_worker(group, entry.route, self.workers, t, self.model, cfg, self.worker_index)
                if asg is not None:
                    self._dispatch(group, entry.route, asg, t, decision, thetas)
                    continue
            if t > order.timeout_at:
                self._reject(order, t, "timeout")
            else:
                self.agent.waited(oid, t)

    def run(self) -> SimResult:
        cfg = self.config
        t0 = time.perf_counter()
        self.agent.start(self)
        period = cfg.check_ms
        i = 0
        n = len(self.orders)
        next_tick = period * (self.orders[0].release // period + 1) if n else 0
        while i < n or len(self.pool):
            if i < n and self.orders[i].release <= next_tick:
                o = self.orders[i]
                i += 1
                self.now = o.release
                self.pool.insert_order(o, o.release)
                if self.env is not None:
                    self.env.add_order(o)
                self._emit(o.release, "arrive", o.id, p=o.penalty, direct=o.direct)
                self.agent.arrive(o, o.release)
                continue
            self.now = next_tick
            self._check(next_tick)
            self.agent.checked(next_tick)
            next_tick += period
        elapsed = time.perf_counter() - t0
        self.report = build_report(self, elapsed if cfg.record_timing else None)
        return SimResult(self.report, self.log, self.served, self.rejected)


def run_simulation(orders, workers, config: SimConfig, model=None, thresholds=None,
                   agent: Agent | None = None, bbox=None) -> SimResult:
    return Simulation(orders, workers, config, model, thresholds, agent, bbox).run()


# ----------------------------------------------------------------- metrics
def build_report(sim: Simulation, elapsed: float | None) -> dict:
    served, rejected = sim.served, sim.rejected
    n = len(sim.orders)
    obj = objective(served, rejected)
    uc = unified_cost(served, sim.rejected_orders, sim.worker_travel, sim.config.penalty_factor)
    rep = {
        "strategy": sim.config.strategy,
        "n_orders": n,
        "n_served": len(served),
        "n_rejected": len(rejected),
        "service_rate": len(served) / n if n else 0.0,
        "objective_ms": obj,
        "unified_cost_ms": uc,
        "worker_travel_ms": sim.worker_travel,
        "total_extra_time_s": obj / 1000.0,
        "unified_cost_s": uc / 1000.0,
        "mean_extra_time_s": obj / n / 1000.0 if n else 0.0,
        "mean_served_extra_time_s": (sum(r.t_e for r in served) / len(served) / 1000.0) if served else 0.0,
        "mean_response_s": (sum(r.t_r for r in served) / len(served) / 1000.0) if served else 0.0,
        "mean_detour_s": (sum(r.t_d for r in served) / len(served) / 1000.0) if served else 0.0,
        "dispatch_causes": dict(sorted(sim.causes.items())),
    }
    if elapsed is not None:
        rep["running_time_s"] = elapsed
        rep["running_time_per_order_s"] = elapsed / n if n else 0.0
    return rep


def format_event_log(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def read_event_log(path_or_text) -> list[dict]:
    if "\n" in str(path_or_text):
        return list(csv.DictReader(io.StringIO(path_or_text)))
    with open(path_or_text, newline="") as fh:
        return list(csv.DictReader(fh))


def replay_log(rows, alpha: float = 1.0, beta: float = 1.0, penalty_factor: float = 10.0) -> dict:
    """Recompute the report totals from event-log rows.

    Extra times are rebuilt from the logged ``t_r``/``t_d`` rather than read
    back, so the check covers the metric formula as well as the bookkeeping.
    """
    arrived, served, rejected = set(), {}, {}
    objective_ms = 0
    travel = 0
    reject_direct = 0
    for r in rows:
        ev = r["event"]
        if ev == "arrive":
            arrived.add(int(r["order_id"]))
        elif ev == "dispatch":
            oid = int(r["order_id"])
            if oid in served or oid in rejected:
                raise ValueError(f"order {oid} finished twice")
            t_e = alpha * int(r["t_d"]) + beta * int(r["t_r"])
            served[oid] = t_e
            objective_ms += t_e
        elif ev == "reject":
            oid = int(r["order_id"])
            if oid in served or oid in rejected:
                raise ValueError(f"order {oid} finished twice")
            rejected[oid] = int(r["p"])
            objective_ms += int(r["p"])
            reject_direct += int(r["direct_ms"])
        elif ev == "assign":
            travel += int(r["travel_ms"])
    return {"n_orders": len(arrived), "n_served": len(served), "n_rejected": len(rejected),
            "objective_ms": objective_ms, "worker_travel_ms": travel,
            "unified_cost_ms": travel + penalty_factor * reject_direct}


def threshold_dispatch_violations(rows) -> list[int]:
    """Group ids dispatched by the threshold rule whose summed extra time exceeds the summed thresholds."""
    groups: dict[int, list] = {}
    for r in rows:
        if r["event"] == "dispatch" and r["cause"] == "threshold":
            groups.setdefault(int(r["group_id"]), []).append(r)
    bad = []
    for gid, members in groups.items():
        members.sort(key=lambda r: int(r["order_id"]))
        if sum(float(m["t_e"]) for m in members) > sum(float(m["theta"]) for m in members):
            bad.append(gid)
    return bad


def historical_extra_times(orders, workers, config: SimConfig, model=None) -> np.ndarray:
    """Extra times (s) of the orders an online run serves, used as GMM training data."""
    cfg = SimConfig.from_dict({**config.to_dict(), "strategy": "online"})
    res = run_simulation(orders, workers, cfg, model)
    return np.array([r.t_e / 1000.0 for r in res.served])
