"""Shared trainer plumbing: configuration, observation scaling, act wrappers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nnet
from ..windows import OMEGA_SCALE, THETA_SCALE
from .env import Transition

ALGOS = ("DDPG", "SAC", "BC", "AIRL")


@dataclass(frozen=True)
class AlgoConfig:
    algo: str = "DDPG"
    actor_hidden: tuple = (64, 64)
    critic_hidden: tuple = (64, 64)
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    batch: int = 256
    buffer_capacity: int = 100_000
    explore_sigma: float = 0.1
    entropy_target: float = -1.0
    warmup_steps: int = 1000
    reward_scale: float = 1e-3

    def __post_init__(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")


@dataclass
class TrainResult:
    actor_spec: nnet.NetworkSpec
    actor: nnet.Parameters
    steps: int
    log: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    eval_history: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def spawn_seeds(seed, n: int):
    """Split one seed (int or SeedSequence) into n independent children."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def obs_of(theta: float, omega: float) -> np.ndarray:
    return np.array([theta / THETA_SCALE, omega / OMEGA_SCALE])


def obs_batch(states: np.ndarray) -> np.ndarray:
    return states / np.array([THETA_SCALE, OMEGA_SCALE])


def polyak_update(target: nnet.Parameters, online: nnet.Parameters, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    target.data *= 1.0 - tau
    target.data += tau * online.data


def actor_act_fn(spec: nnet.NetworkSpec, params: nnet.Parameters):
    """Deterministic policy: tanh head read directly."""
    run = nnet.Runner(spec, params)
    def act(theta: float, omega: float) -> float:
        return float(run(obs_of(theta, omega)[None, :])[0])
    return act


def sac_mean_act_fn(spec: nnet.NetworkSpec, params: nnet.Parameters):
    """Greedy read of a squashed-Gaussian actor: tanh of the mean."""
    run = nnet.Runner(spec, params)
    def act(theta: float, omega: float) -> float:
        return float(np.tanh(run(obs_of(theta, omega)[None, :])[0]))
    return act


def record_transition(sink: list, state, action, reward, next_state, done, limit: int = 100) -> None:
    if len(sink) < limit:
        sink.append(Transition(
            (state.theta, state.omega), float(action), float(reward),
            (next_state.theta, next_state.omega), bool(done),
        ))
