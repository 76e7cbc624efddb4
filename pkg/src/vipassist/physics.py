"""Fixed-step simulation of the virtual inverted pendulum.

Angles are degrees throughout (trig converts internally), velocities deg/s,
joystick deflection a unit-interval command. The upright balance point is the
unstable equilibrium theta = 0; reaching the crash bound resets the pendulum
there with zero velocity while the trial clock keeps running.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["PendulumState", "PhysicsConfig", "StepOutcome", "step", "step_raw"]

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class PendulumState:
    theta: float  # degrees from balance, positive = clockwise
    omega: float  # degrees / second
    t: float = 0.0  # elapsed trial time, seconds


@dataclass(frozen=True)
class PhysicsConfig:
    k_p: float = 600.0  # gravity-like constant, deg/s^2
    gain: float = 600.0  # joystick authority, deg/s^2 per unit deflection
    crash_bound: float = 60.0  # degrees
    dt: float = 1.0 / 200.0  # seconds

    def __post_init__(self) -> None:
        if not (self.k_p > 0 and self.gain > 0 and self.crash_bound > 0 and self.dt > 0):
            raise ValueError("physics constants must all be positive")


@dataclass(frozen=True)
class StepOutcome:
    state: PendulumState
    crashed: bool


def step_raw(state: PendulumState, deflection: float, cfg: PhysicsConfig) -> PendulumState:
    """One semi-implicit Euler step with no crash handling.

    Acceleration is k_p*sin(theta) plus the additive joystick term gain*d;
    velocity updates first, then position uses the new velocity. Callers that
    need the pre-reset view of a crashing step (reward evaluation) use this
    directly; everything else goes through :func:`step`.
    """
    _validate(state, deflection)
    alpha = cfg.k_p * math.sin(state.theta * _DEG) + cfg.gain * deflection
    omega = state.omega + alpha * cfg.dt
    theta = state.theta + omega * cfg.dt
    return PendulumState(theta, omega, state.t + cfg.dt)


def step(state: PendulumState, deflection: float, cfg: PhysicsConfig) -> StepOutcome:
    """Advance one step; |theta| >= crash_bound crashes and resets to balance."""
    nxt = step_raw(state, deflection, cfg)
    if abs(nxt.theta) >= cfg.crash_bound:
        return StepOutcome(PendulumState(0.0, 0.0, nxt.t), True)
    return StepOutcome(nxt, False)


def _validate(state: PendulumState, deflection: float) -> None:
    if not (math.isfinite(state.theta) and math.isfinite(state.omega) and math.isfinite(state.t)):
        raise ValueError("non-finite pendulum state")
    if not math.isfinite(deflection):
        raise ValueError("non-finite deflection")
    if abs(deflection) > 1.0:
        raise ValueError(f"deflection {deflection!r} outside [-1, 1]")
