"""Pilot policies and the simulated-operator behavioral model.

A pilot is anything with a `config` (how it wants its window built) and an
`act(window) -> deflection`. The behavioral model wraps a pilot's step with
the simulated operator's response to assistant suggestions: a one-shot
accept/reject draw, a reaction delay, and execution noise on the value.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nnet
from .windows import ObservationWindow, WindowConfig

PILOT_SAMPLE_HZ = 50.0


@dataclass(frozen=True)
class TwinBehavior:
    accept_prob: float = 0.8
    delay_base: float = 0.4
    delay_jitter: float = 0.05
    noise: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.accept_prob <= 1.0:
            raise ValueError("accept_prob must lie in [0, 1]")
        if not self.delay_base > self.delay_jitter >= 0.0:
            raise ValueError("need delay_base > delay_jitter >= 0")
        if self.noise < 0.0:
            raise ValueError("noise half-width must be >= 0")


@dataclass(frozen=True)
class PendingExecution:
    """An accepted suggestion waiting out the operator's reaction delay."""

    value: float
    execute_value: float
    due: float
    delay: float
    noise: float


def twin_decide(deflection: float, t_issued: float, behavior: TwinBehavior, rng) -> Optional[PendingExecution]:
    """One-shot response to a new suggestion; None means it was rejected."""
    if rng.random() >= behavior.accept_prob:
        return None
    delay = behavior.delay_base + rng.uniform(-behavior.delay_jitter, behavior.delay_jitter)
    noise = rng.uniform(-behavior.noise, behavior.noise)
    value = float(np.clip(deflection + noise, -1.0, 1.0))
    return PendingExecution(float(deflection), value, t_issued + delay, delay, noise)


def twin_execute(own_deflection: float, pending, t_now: float, behavior: TwinBehavior, rng):
    """Choose what actually moves the stick this sample.

    `pending` may be None, a fresh suggestion (anything with .deflection and
    .t_issued, decided here on first sight), or an already-decided
    PendingExecution. Returns (executed, executor, pending_after); executor
    is "assistant" for exactly the one sample an accepted suggestion lands on.
    """
    if pending is not None and not isinstance(pending, PendingExecution):
        pending = twin_decide(pending.deflection, pending.t_issued, behavior, rng)
    if pending is not None and t_now >= pending.due - 1e-9:
        return pending.execute_value, "assistant", None
    return float(np.clip(own_deflection, -1.0, 1.0)), "pilot", pending


class DelayLine:
    """Defers actions by a fixed lead; holds 0 until the first one comes due."""

    def __init__(self, future: float):
        if future < 0:
            raise ValueError("future must be >= 0")
        self.future = future
        self._queue: deque = deque()
        self._current = 0.0

    def push(self, t_decided: float, value: float) -> None:
        if self.future == 0.0:
            self._current = float(value)
        else:
            self._queue.append((t_decided + self.future, float(value)))

    def value_at(self, t: float) -> float:
        while self._queue and self._queue[0][0] <= t + 1e-9:
            self._current = self._queue.popleft()[1]
        return self._current

    def reset(self) -> None:
        self._queue.clear()
        self._current = 0.0


@dataclass(frozen=True)
class TwinProfile:
    proficiency: str
    arch: str
    win_size: float
    future: float
    source: str = "MARS"

    def __post_init__(self) -> None:
        if self.source not in ("MARS", "VIP"):
            raise ValueError(f"unknown training source {self.source!r}")

    def window_config(self, sample_hz: float = PILOT_SAMPLE_HZ) -> WindowConfig:
        return WindowConfig(self.win_size, self.future, include_deflections=True, sample_hz=sample_hz)

    def network_spec(self, sample_hz: float = PILOT_SAMPLE_HZ) -> nnet.NetworkSpec:
        cfg = self.window_config(sample_hz)
        hidden = (64, 64) if self.arch == "mlp" else (32,)
        return nnet.NetworkSpec(self.arch, cfg.input_dim(self.arch), hidden, 1, "tanh")


# the three exemplar proficiency profiles, exactly as studied
TWIN_PROFILES = {
    "Good": TwinProfile("Good", "lstm", 0.2, 0.0),
    "Medium": TwinProfile("Medium", "gru", 0.3, 0.1),
    "Bad": TwinProfile("Bad", "mlp", 0.5, 0.0),
}


class NetPilot:
    """Network policy evaluated over observation windows."""

    def __init__(self, spec: nnet.NetworkSpec, params: nnet.Parameters, config: WindowConfig):
        expected = config.input_dim(spec.arch)
        if spec.input_dim != expected:
            raise ValueError(
                f"network input_dim {spec.input_dim} does not fit this window "
                f"({expected} for {spec.arch})"
            )
        self.spec = spec
        self.params = params
        self.config = config
        self._run = nnet.Runner(spec, params)

    def act(self, window: ObservationWindow) -> float:
        if self.config.include_deflections and window.deflections is None:
            raise ValueError("window lacks a deflection lane this pilot requires")
        feats = window.features()
        if feats.shape != (self.config.n_steps, self.config.feature_dim):
            raise ValueError(
                f"window shape {feats.shape} does not match "
                f"({self.config.n_steps}, {self.config.feature_dim})"
            )
        return float(np.clip(self._run(feats)[0], -1.0, 1.0))


def pilot_act(spec: nnet.NetworkSpec, params: nnet.Parameters, window: ObservationWindow, config: WindowConfig) -> float:
    """One-shot NetPilot evaluation; see NetPilot for the window contract."""
    return NetPilot(spec, params, config).act(window)


class PdPilot:
    """Scripted proportional-derivative operator; competent but mechanical."""

    def __init__(self, kp: float = 0.02, kd: float = 0.008, sample_hz: float = PILOT_SAMPLE_HZ):
        self.kp = kp
        self.kd = kd
        self.config = WindowConfig(0.0, 0.0, include_deflections=False, sample_hz=sample_hz)

    def act(self, window: ObservationWindow) -> float:
        raw = -(self.kp * window.thetas[-1] + self.kd * window.omegas[-1])
        return float(np.clip(raw, -1.0, 1.0))


class RandomPilot:
    """Uniform random deflections, redrawn every step it is asked to act."""

    def __init__(self, seed, sample_hz: float = PILOT_SAMPLE_HZ):
        self._rng = np.random.default_rng(seed)
        self.config = WindowConfig(0.0, 0.0, include_deflections=False, sample_hz=sample_hz)

    def act(self, window: ObservationWindow) -> float:
        return float(self._rng.uniform(-1.0, 1.0))
