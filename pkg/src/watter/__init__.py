"""Order pooling and threshold-based dispatch for ridesharing."""
from .domain import Order, Worker
from .poolgraph import ShareGraph
from .routing import RoutePlan, plan_best_route
from .simharness import SimConfig, SimResult, run_simulation
from .spatial import GeodesicModel, GraphModel
from .strategy import make_decision
from .thresholdopt import GaussianMixtureEM, ThresholdOptimizer

__version__ = "0.1.0"

__all__ = ["GaussianMixtureEM", "GeodesicModel", "GraphModel", "Order", "RoutePlan", "ShareGraph",
           "SimConfig", "SimResult", "ThresholdOptimizer", "Worker", "make_decision", "plan_best_route",
           "run_simulation"]
