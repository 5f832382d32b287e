import os

import pytest
from hypothesis import HealthCheck, settings

from watter import simharness
from watter.simharness import LOG_COLUMNS, replay_log, threshold_dispatch_violations

from .helpers import ACCEPTANCE, RUN_CHECKS

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def check_run(sim, result):
    """Bookkeeping identities and the threshold dispatch bound, recomputed from the event log."""
    served = {r.order_id for r in result.served}
    rejected = {r.order_id for r in result.rejected}
    assert not served & rejected
    assert len(served) + len(rejected) == len(sim.orders)
    rows = [dict(zip(LOG_COLUMNS, (str(v) for v in row))) for row in result.log]
    cfg = sim.config
    replay = replay_log(rows, cfg.alpha, cfg.beta, cfg.penalty_factor)
    rep = result.report
    for key in ("n_orders", "n_served", "n_rejected", "objective_ms", "unified_cost_ms", "worker_travel_ms"):
        assert replay[key] == rep[key], (key, replay[key], rep[key])
    RUN_CHECKS["runs"] += 1
    if cfg.kind == "threshold":
        assert threshold_dispatch_violations(rows) == []
        RUN_CHECKS["threshold_runs"] += 1
        RUN_CHECKS["threshold_dispatches"] += sum(1 for r in rows if r["event"] == "dispatch"
                                                  and r["cause"] == "threshold")


@pytest.fixture(autouse=True, scope="session")
def _check_every_run():
    original = simharness.Simulation.run

    def run(self):
        result = original(self)
        check_run(self, result)
        return result

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(simharness.Simulation, "run", run)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
        terminalreporter.write_line(f"bookkeeping checked on {RUN_CHECKS['runs']} simulation runs "
                                    f"({RUN_CHECKS['threshold_runs']} threshold runs, "
                                    f"{RUN_CHECKS['threshold_dispatches']} threshold dispatches)")
