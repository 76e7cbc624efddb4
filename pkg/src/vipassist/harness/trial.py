"""The 200 Hz co-performance loop.

One trial wires pilot, optional assistant, and optional crash predictor
around the physics. Models that consume 50 Hz windows (twins, the
predictor, window-based assistants) are evaluated on a decimated lattice
and their outputs held between ticks.

Row convention: each row carries the state at its timestamp, the deflection
executed over the following sample interval, and a crash flag meaning that
interval ended at the bound (the next row is then the reset row).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import physics
from ..assistant import GatingPolicy, Suggestion, gate
from ..metrics import classify_deflection
from ..pilots import TwinBehavior, twin_execute
from ..windows import TraceBuffer, WindowConfig, window_at

_STATE_ONLY = WindowConfig(win_size=0.0, include_deflections=False)


@dataclass(frozen=True)
class TrialConfig:
    physics: physics.PhysicsConfig = physics.PhysicsConfig()
    trial_seconds: float = 30.0
    gating: GatingPolicy = GatingPolicy()
    twin_behavior: TwinBehavior = TwinBehavior()
    start_span: float = 5.0
    predictor_stride: int = 4

    def __post_init__(self) -> None:
        if self.trial_seconds <= 0:
            raise ValueError("trial_seconds must be positive")
        if not 0 <= self.start_span < self.physics.crash_bound:
            raise ValueError("start_span must fit inside the crash bound")
        if self.predictor_stride < 1:
            raise ValueError("predictor_stride must be >= 1")


@dataclass
class TrialLog:
    times: np.ndarray
    thetas: np.ndarray
    omegas: np.ndarray
    deflections: np.ndarray
    crash_probabilities: np.ndarray
    pilot_deflections: np.ndarray
    assistant_deflections: np.ndarray
    executors: np.ndarray
    deflection_classes: np.ndarray
    crash_flags: np.ndarray
    suggestions: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.times.size

    def to_trajectory(self):
        """Crash-training view: flags moved onto the reset row that follows
        each crashing interval (a trailing crash keeps its own row)."""
        from ..crashpred import TrajectoryArrays

        shifted = np.zeros_like(self.crash_flags)
        shifted[1:] = self.crash_flags[:-1]
        if self.crash_flags[-1]:
            shifted[-1] = True
        return TrajectoryArrays(self.times, self.thetas, self.omegas,
                                self.deflections, shifted)


def _model_window_config(model, default: WindowConfig) -> WindowConfig:
    cfg = getattr(model, "window_config", None) or getattr(model, "config", None)
    return cfg if isinstance(cfg, WindowConfig) else default


def _named(call, component: str):
    try:
        return call()
    except ValueError as exc:
        raise ValueError(f"{component}: {exc}") from exc


def run_trial(pilot, assistant, crash_predictor, cfg: TrialConfig, seed) -> TrialLog:
    """Simulate one trial; returns the full 200 Hz log.

    `assistant` may be None (solo run); `crash_predictor` may be None, which
    leaves the probability column NaN and the gate on its angle branch only.
    `seed` is anything numpy SeedSequence accepts, including tuples.
    """
    entropy = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(entropy)
    n = int(round(cfg.trial_seconds / cfg.physics.dt))
    stride = cfg.predictor_stride

    pilot_wc = _model_window_config(pilot, _STATE_ONLY)
    pred_wc = _model_window_config(crash_predictor, _STATE_ONLY)
    asst_wc = _model_window_config(assistant, _STATE_ONLY)

    state = physics.PendulumState(rng.uniform(-cfg.start_span, cfg.start_span), 0.0, 0.0)
    buf = TraceBuffer(capacity_hint=n // stride + 2)

    cols = np.empty((n, 7))
    executors = np.empty(n, dtype="<U9")
    classes = np.empty(n, dtype="<U13")
    flags = np.zeros(n, dtype=bool)
    events: list[Suggestion] = []

    pilot_held = 0.0
    prob_held = float("nan")
    asst_held = 0.0
    active: Suggestion | None = None
    pending = None

    for k in range(n):
        t = k * cfg.physics.dt
        if k % stride == 0:
            buf.push(t, state.theta, state.omega, 0.0)
            i = len(buf) - 1
            pilot_held = _named(lambda: float(pilot.act(window_at(buf, i, pilot_wc))), "pilot")
            if crash_predictor is not None:
                prob_held = _named(lambda: float(crash_predictor(window_at(buf, i, pred_wc))),
                                   "crash predictor")
            if assistant is not None:
                asst_held = _named(lambda: float(assistant.act(window_at(buf, i, asst_wc))),
                                   "assistant")

        if assistant is not None and gate(prob_held, state.theta, cfg.gating):
            flip = (active is not None and asst_held * active.deflection < 0.0)
            if active is None or flip:
                active = Suggestion(t, asst_held)
                events.append(active)
                pending = active
        else:
            active = None
            pending = None

        if assistant is not None:
            executed, executor, pending = twin_execute(pilot_held, pending, t,
                                                       cfg.twin_behavior, rng)
        else:
            executed, executor = float(np.clip(pilot_held, -1.0, 1.0)), "pilot"

        if k % stride == 0:
            buf.set_last_deflection(executed)

        out = physics.step(state, executed, cfg.physics)
        cols[k] = (t, state.theta, state.omega, executed, prob_held, pilot_held,
                   active.deflection if active is not None else float("nan"))
        executors[k] = executor
        classes[k] = classify_deflection(state.theta, state.omega, executed)
        flags[k] = out.crashed
        if executor == "assistant" or out.crashed:
            active = None
            pending = None
        state = out.state

    return TrialLog(times=cols[:, 0], thetas=cols[:, 1], omegas=cols[:, 2],
                    deflections=cols[:, 3], crash_probabilities=cols[:, 4],
                    pilot_deflections=cols[:, 5], assistant_deflections=cols[:, 6],
                    executors=executors, deflection_classes=classes,
                    crash_flags=flags, suggestions=events)
