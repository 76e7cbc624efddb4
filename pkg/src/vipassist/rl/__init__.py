"""Training environment and policy trainers for the balancing task."""
from .env import EnvConfig, Transition, env_reset, env_step, reward
from .common import ALGOS, AlgoConfig, TrainResult, actor_act_fn, obs_batch, obs_of, polyak_update, sac_mean_act_fn
from .replay import ReplayBuffer
from .evaluate import EvalReport, evaluate_policy
from .ddpg import train_ddpg
from .sac import SacCore, train_sac
from .bc import train_bc

__all__ = [
    "EnvConfig",
    "Transition",
    "env_reset",
    "env_step",
    "reward",
    "ALGOS",
    "AlgoConfig",
    "TrainResult",
    "actor_act_fn",
    "obs_batch",
    "obs_of",
    "polyak_update",
    "sac_mean_act_fn",
    "ReplayBuffer",
    "EvalReport",
    "evaluate_policy",
    "train_ddpg",
    "SacCore",
    "train_sac",
    "train_bc",
]
