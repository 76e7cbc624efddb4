"""Bounded pendulum training environment with the task's penalty reward.

Training integrates the same physics at a coarser step (50 Hz by default)
than live trials; policies consume (theta, omega) so the rate never leaks
into them. During training an episode terminates on crash instead of
resetting, so the boundary penalty lands undiluted.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .. import physics


def reward(theta: float, omega: float, deflection: float, inner_bound: float = 30.0) -> float:
    """Zero inside ±inner_bound degrees, quadratic penalty outside."""
    if abs(theta) <= inner_bound:
        return 0.0
    return -(theta * theta + 0.1 * omega * omega + 0.01 * deflection * deflection)


@dataclass(frozen=True)
class EnvConfig:
    physics: physics.PhysicsConfig = physics.PhysicsConfig()
    episode_seconds: float = 30.0
    train_dt: float = 0.02
    start_range: float = 60.0
    reward_inner_bound: float = 30.0

    def __post_init__(self) -> None:
        if self.train_dt <= 0:
            raise ValueError("train_dt must be positive")
        if not 0 < self.reward_inner_bound < self.physics.crash_bound:
            raise ValueError("need 0 < reward_inner_bound < crash bound")

    @property
    def step_config(self) -> physics.PhysicsConfig:
        return dataclasses.replace(self.physics, dt=self.train_dt)


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: float
    reward: float
    next_state: tuple
    done: bool


def env_reset(cfg: EnvConfig, rng) -> physics.PendulumState:
    theta = rng.uniform(-cfg.start_range, cfg.start_range)
    while abs(theta) >= cfg.physics.crash_bound:
        theta = rng.uniform(-cfg.start_range, cfg.start_range)
    return physics.PendulumState(theta, 0.0, 0.0)


def env_step(state: physics.PendulumState, action: float, cfg: EnvConfig):
    """-> (next_state, reward, done). The next state is never reset here."""
    nxt = physics.step_raw(state, action, cfg.step_config)
    r = reward(nxt.theta, nxt.omega, action, cfg.reward_inner_bound)
    crashed = abs(nxt.theta) >= cfg.physics.crash_bound
    done = crashed or nxt.t >= cfg.episode_seconds - 1e-9
    return nxt, r, done
