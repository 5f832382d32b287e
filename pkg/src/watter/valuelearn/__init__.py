"""Value-function learning for per-order dispatch thresholds."""
from .checkpoint import load_checkpoint, save_checkpoint
from .features import DemandSupply, feature_scale, featurize, state_dim
from .network import MLP, Adam
from .replay import Buffer, ReplayMemory, Transition, replace_terminate
from .rewards import accumulated_reward, combined_loss
from .training import Collector, TrainConfig, ValueFunctionLearner

__all__ = ["Adam", "Buffer", "Collector", "DemandSupply", "MLP", "ReplayMemory", "TrainConfig",
           "Transition", "ValueFunctionLearner", "accumulated_reward", "combined_loss",
           "feature_scale", "featurize", "load_checkpoint", "replace_terminate", "save_checkpoint",
           "state_dim"]
