"""Shared builders for the test modules."""
from watter.domain import make_order
from watter.simharness import SimConfig, generate_workers, generate_workload, orders_from_rows
from watter.spatial import GeodesicModel

CENTER = (104.06, 30.66)


def small_workload(n=300, seed=0, workers=20, trip_km=(0.8, 2.5), duration_s=None, **cfg_kw):
    """Orders, workers, config and model for a short synthetic run."""
    cfg = SimConfig(n_workers=workers, seed=seed, **cfg_kw)
    model = GeodesicModel(cfg.speed_mps)
    dur = duration_s if duration_s is not None else 3600.0 * n / 5000
    orders = orders_from_rows(generate_workload(n, dur, seed=seed, trip_km=trip_km), model, cfg)
    return orders, generate_workers(orders, workers, cfg.k_max, seed=seed), cfg, model


def random_orders(rng, n, model, t0=0, spread=0.01, tau=(1.6, 3.0), release_span=0, first_id=0,
                  corridor=False):
    """Orders with random nearby endpoints; the deadline scale is drawn per order.

    With ``corridor`` pickups cluster near one point and drop-offs near
    another, which makes shared routes far more likely.
    """
    out = []
    dc = (CENTER[0] + 0.02, CENTER[1] + 0.01) if corridor else CENTER
    s = spread / 4 if corridor else spread
    for i in range(n):
        p = (CENTER[0] + rng.uniform(-s, s), CENTER[1] + rng.uniform(-s, s))
        d = (dc[0] + rng.uniform(-s, s), dc[1] + rng.uniform(-s, s))
        direct = model.cost(p, d)
        if direct == 0:
            d = (d[0] + 1e-3, d[1])
            direct = model.cost(p, d)
        rel = t0 + int(rng.integers(0, release_span + 1))
        out.append(make_order(first_id + i, p, d, rel, direct, tau_scale=rng.uniform(*tau)))
    return out


ACCEPTANCE: list[str] = []
RUN_CHECKS = {"runs": 0, "threshold_runs": 0, "threshold_dispatches": 0}


def record(criterion, ok, detail):
    """Print and keep one pass/fail line per acceptance criterion."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return ok
