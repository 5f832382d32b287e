"""Command-line entry point: ``watter <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .simharness import (IngestStats, SimConfig, generate_workers, generate_workload, historical_extra_times,
                         ingest_orders, read_event_log, replay_log, run_simulation, write_orders_csv)
from .spatial import GeodesicModel
from .strategy import GmmThresholds, ValueNetThresholds
from .thresholdopt import GaussianMixtureEM, ThresholdOptimizer, select_k_bic
from .valuelearn import TrainConfig, ValueFunctionLearner, load_checkpoint, save_checkpoint, state_dim

log = logging.getLogger("watter")


def _config(path, strategy=None) -> SimConfig:
    cfg = SimConfig.load(path) if path else SimConfig()
    if strategy:
        cfg = SimConfig.from_dict({**cfg.to_dict(), "strategy": strategy})
    return cfg


def _load_orders(path, cfg: SimConfig):
    stats = IngestStats()
    model = GeodesicModel(cfg.speed_mps)
    orders = ingest_orders(path, cfg, model, stats)
    if stats.skipped or stats.zero_cost:
        log.warning("%s: skipped %d malformed and %d zero-cost rows", path, stats.skipped, stats.zero_cost)
    return orders, model


def _optimizer(path) -> ThresholdOptimizer:
    return ThresholdOptimizer.from_mixture(GaussianMixtureEM.load(path))


def net_thresholds(path, cfg: SimConfig) -> ValueNetThresholds:
    net, header = load_checkpoint(path)
    if header["dims"] != state_dim(cfg.grid_n):
        raise SystemExit(f"{path}: network expects {header['dims']} inputs, grid_n={cfg.grid_n} "
                         f"gives {state_dim(cfg.grid_n)}")
    return ValueNetThresholds(lambda states: 1000.0 * net.forward(states))


def read_extra_times(path) -> np.ndarray:
    """Extra times in seconds from a one-column CSV or from an event log's dispatch rows."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return np.empty(0)
    header = rows[0]
    if "event" in header and "t_e" in header:
        ev, te = header.index("event"), header.index("t_e")
        return np.array([float(r[te]) / 1000.0 for r in rows[1:] if r[ev] == "dispatch"])
    try:
        float(header[0])
        body = rows
    except ValueError:
        body = rows[1:]
    return np.array([float(r[0]) for r in body if r])


# ------------------------------------------------------------- subcommands
def cmd_generate(args) -> int:
    rows = generate_workload(args.n_orders, args.duration_s, seed=args.seed, trip_km=tuple(args.trip_km),
                             city_seed=args.city_seed)
    write_orders_csv(args.out, rows)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args.config, args.strategy)
    orders, model = _load_orders(args.orders, cfg)
    workers = generate_workers(orders, cfg.n_workers, cfg.k_max, seed=cfg.seed)
    thresholds = None
    if cfg.kind == "threshold":
        if args.net:
            thresholds = net_thresholds(args.net, cfg)
        elif args.gmm:
            thresholds = GmmThresholds(_optimizer(args.gmm))
        else:
            raise SystemExit("the expect strategy needs --gmm or --net")
    res = run_simulation(orders, workers, cfg, model, thresholds=thresholds)
    Path(args.out).write_text(res.report_json() + "\n")
    if args.log:
        Path(args.log).write_text(res.log_csv())
    print(json.dumps({k: res.report[k] for k in ("n_orders", "service_rate", "mean_extra_time_s")}))
    return 0


def cmd_extras(args) -> int:
    cfg = _config(args.config)
    orders, model = _load_orders(args.orders, cfg)
    workers = generate_workers(orders, cfg.n_workers, cfg.k_max, seed=cfg.seed)
    x = historical_extra_times(orders, workers, cfg, model)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["extra_time_s"])
        w.writerows([repr(float(v))] for v in x)
    return 0


def cmd_fit_gmm(args) -> int:
    x = read_extra_times(args.input)
    if x.size == 0:
        raise SystemExit(f"{args.input}: no extra times")
    gmm = select_k_bic(x, seed=args.seed) if args.k == 0 else GaussianMixtureEM(args.k, random_state=args.seed).fit(x)
    gmm.save(args.out)
    print(json.dumps(gmm.to_dict()))
    return 0


def cmd_train_value(args) -> int:
    cfg = _config(args.config, "expect")
    orders, model = _load_orders(args.orders, cfg)
    workers = generate_workers(orders, cfg.n_workers, cfg.k_max, seed=cfg.seed)
    tc = TrainConfig(epochs=args.epochs, warm_epochs=min(args.warm_epochs, args.epochs), seed=args.seed)
    learner = ValueFunctionLearner(cfg, tc, gmm=_optimizer(args.gmm), model=model).fit(orders, workers)
    save_checkpoint(args.out, learner.net_, epoch=args.epochs, extra={"config": learner.config_dict()})
    for rec in learner.history_:
        print(json.dumps(rec))
    return 0


REPORT_METRICS = ("n_orders", "n_served", "n_rejected", "service_rate", "mean_extra_time_s",
                  "mean_response_s", "mean_detour_s", "objective_ms", "unified_cost_ms", "worker_travel_ms")


def summarize_log(rows, alpha=1.0, beta=1.0, penalty_factor=10.0) -> dict:
    """Report metrics plus the response/detour split recomputed from one event log."""
    tot = replay_log(rows, alpha, beta, penalty_factor)
    disp = [r for r in rows if r["event"] == "dispatch"]
    n = tot["n_orders"]
    resp = sum(int(r["t_r"]) for r in disp) / 1000.0
    det = sum(int(r["t_d"]) for r in disp) / 1000.0
    k = len(disp)
    out = dict(tot)
    out.update({
        "service_rate": tot["n_served"] / n if n else 0.0,
        "mean_extra_time_s": tot["objective_ms"] / n / 1000.0 if n else 0.0,
        "mean_response_s": resp / k if k else 0.0,
        "mean_detour_s": det / k if k else 0.0,
        "response_share": resp / (resp + det) if resp + det else 0.0,
        "detour_share": det / (resp + det) if resp + det else 0.0,
    })
    return out


def cmd_report(args) -> int:
    runs = {}
    for path in args.logs:
        name = Path(path).stem
        if name in runs:
            name = str(path)
        runs[name] = summarize_log(read_event_log(path), args.alpha, args.beta, args.penalty_factor)
    tradeoff_keys = ("mean_response_s", "mean_detour_s", "response_share", "detour_share")
    if args.format == "json":
        doc = {"metrics": {m: {r: runs[r][m] for r in runs} for m in REPORT_METRICS},
               "tradeoff": {r: {m: runs[r][m] for m in tradeoff_keys} for r in runs}}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        lines = [",".join(["metric", *runs])]
        for m in REPORT_METRICS:
            lines.append(",".join([m, *(repr(runs[r][m]) for r in runs)]))
        lines += ["", ",".join(["tradeoff", *runs])]
        for m in tradeoff_keys:
            lines.append(",".join([m, *(repr(runs[r][m]) for r in runs)]))
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_example1(args) -> int:
    from .scenarios import run_example
    print(json.dumps(run_example(args.data), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="watter", description="Order pooling and dispatch simulator.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic order CSV")
    p.add_argument("--n-orders", type=int, default=5000)
    p.add_argument("--duration-s", type=float, default=3600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--city-seed", type=int, default=0)
    p.add_argument("--trip-km", type=float, nargs=2, default=(0.8, 2.5))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run one strategy over an order file")
    p.add_argument("--orders", required=True)
    p.add_argument("--config")
    p.add_argument("--strategy", choices=["online", "timeout", "expect"])
    p.add_argument("--gmm")
    p.add_argument("--net")
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extras", help="extra times of an online run, as GMM input")
    p.add_argument("--orders", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extras)

    p = sub.add_parser("fit-gmm", help="fit the extra-time mixture")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=3, help="components; 0 selects by BIC")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_gmm)

    p = sub.add_parser("train-value", help="train the value network")
    p.add_argument("--orders", required=True)
    p.add_argument("--gmm", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--warm-epochs", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_value)

    p = sub.add_parser("report", help="tabulate metrics from event logs")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--penalty-factor", type=float, default=10.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("example1", help="travel totals of the bundled six-node scenario")
    p.add_argument("--data", help="directory with graph.txt, orders.csv, workers.csv")
    p.set_defaults(func=cmd_example1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
