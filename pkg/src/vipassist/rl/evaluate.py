"""Greedy policy evaluation at the live 200 Hz rate with auto-reset on crash."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import physics
from .env import EnvConfig


@dataclass(frozen=True)
class EvalReport:
    crashes: int
    mean_abs_theta: float
    per_trial_crashes: tuple
    per_trial_mean_abs_theta: tuple


def evaluate_policy(act_fn, env_cfg: EnvConfig = EnvConfig(), seeds=(1, 2, 3),
                    trial_seconds: float = 30.0) -> EvalReport:
    """Run full trials (crash resets to the balance point, clock keeps going).

    act_fn(theta, omega) -> deflection is queried every physics sample.
    """
    cfg = env_cfg.physics
    steps = int(round(trial_seconds / cfg.dt))
    crashes = []
    means = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        theta0 = rng.uniform(-env_cfg.start_range, env_cfg.start_range)
        while abs(theta0) >= cfg.crash_bound:
            theta0 = rng.uniform(-env_cfg.start_range, env_cfg.start_range)
        state = physics.PendulumState(theta0, 0.0, 0.0)
        n_crash = 0
        abs_sum = 0.0
        for _ in range(steps):
            action = float(np.clip(act_fn(state.theta, state.omega), -1.0, 1.0))
            out = physics.step(state, action, cfg)
            state = out.state
            n_crash += out.crashed
            abs_sum += abs(state.theta)
        crashes.append(n_crash)
        means.append(abs_sum / steps)
    return EvalReport(
        crashes=int(sum(crashes)),
        mean_abs_theta=float(np.mean(means)),
        per_trial_crashes=tuple(crashes),
        per_trial_mean_abs_theta=tuple(float(m) for m in means),
    )
