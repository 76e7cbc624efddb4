"""Authoritative session engine: scripts, trials, records, replay.

Everything in this file is synchronous and deterministic. The network layer
(server.py) drives the same TrialEngine the offline runner uses, so a stored
input stream re-simulates to bit-identical trajectories by construction.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import physics
from ..assistant import GatingPolicy, Suggestion, extract_disagreements, gate, save_episodes
from ..harness.dataio import export_logs
from ..harness.trial import TrialLog, _model_window_config, _STATE_ONLY
from ..metrics import classify_deflection, trial_metrics
from ..windows import TraceBuffer, window_at

MODES = ("solo", "assisted", "observe")


@dataclass(frozen=True)
class Task:
    """One scripted block of trials, all in the same mode."""

    mode: str
    trials: int = 3
    trial_seconds: float = 30.0
    assistant: str | None = None
    coherence: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown task mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError("a task needs at least one trial")
        if self.trial_seconds <= 0:
            raise ValueError("trial_seconds must be positive")
        if not 0.0 <= self.coherence <= 1.0:
            raise ValueError("coherence must lie in [0, 1]")
        if self.mode in ("assisted", "observe") and not self.assistant:
            raise ValueError(f"{self.mode} tasks must name an assistant")
        if self.mode == "solo" and self.assistant:
            raise ValueError("solo tasks take no assistant")


@dataclass(frozen=True)
class SessionScript:
    tasks: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValueError("a session script needs at least one task")
        for task in self.tasks:
            if not isinstance(task, Task):
                raise ValueError("script tasks must be Task instances")

    @property
    def total_trials(self) -> int:
        return sum(t.trials for t in self.tasks)


def script_from_dict(doc: dict) -> SessionScript:
    """Build a script from a parsed config table ({"tasks": [...]})."""
    tasks = doc.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise ValueError("script config needs a non-empty 'tasks' list")
    out = []
    for row in tasks:
        if not isinstance(row, dict):
            raise ValueError("each task must be a table/object")
        known = {"mode", "trials", "trial_seconds", "assistant", "coherence"}
        extra = set(row) - known
        if extra:
            raise ValueError(f"unknown task keys: {sorted(extra)}")
        out.append(Task(
            mode=row.get("mode", ""),
            trials=int(row.get("trials", 3)),
            trial_seconds=float(row.get("trial_seconds", 30.0)),
            assistant=row.get("assistant") or None,
            coherence=float(row.get("coherence", 0.5)),
        ))
    return SessionScript(tuple(out))


@dataclass(frozen=True)
class ServerConfig:
    physics: physics.PhysicsConfig = physics.PhysicsConfig()
    gating: GatingPolicy = GatingPolicy()
    start_span: float = 5.0
    predictor_stride: int = 4
    broadcast_hz: float = 60.0
    pace: float = 1.0  # 1 = wall clock, 0 = flat out (tests, replay)

    def __post_init__(self) -> None:
        if not 0 <= self.start_span < self.physics.crash_bound:
            raise ValueError("start_span must fit inside the crash bound")
        if self.predictor_stride < 1:
            raise ValueError("predictor_stride must be >= 1")
        if not 0 < self.broadcast_hz <= 1.0 / self.physics.dt:
            raise ValueError("broadcast_hz must lie in (0, simulation rate]")
        if self.pace < 0:
            raise ValueError("pace must be >= 0")


@dataclass(frozen=True)
class ModelSet:
    """Named policies a script can reference, plus the shared crash predictor."""

    assistants: dict = field(default_factory=dict)
    predictor: object = None

    def for_task(self, task: Task):
        if task.assistant is None:
            return None
        if task.assistant not in self.assistants:
            raise ValueError(f"script references unknown assistant {task.assistant!r}")
        return self.assistants[task.assistant]


@dataclass
class SessionRecord:
    script: SessionScript
    seed: int
    logs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)  # held deflection per 200 Hz step
    task_of_trial: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    aborted: bool = False
    replay_ok: bool | None = None

    @property
    def crashes(self) -> int:
        return int(sum(m.crashes for m in self.metrics))


class TrialEngine:
    """One trial stepped at the simulation rate; inputs pushed, frames pulled.

    The caller owns cadence (wall-clock pacing or none) and the input source
    (live socket or a recorded stream); the engine owns everything the state
    depends on.
    """

    def __init__(self, cfg: ServerConfig, task: Task, trial_index: int,
                 assistant, predictor, theta0: float, coherence_seeds: np.ndarray):
        self.cfg = cfg
        self.task = task
        self.trial_index = trial_index
        self.assistant = assistant
        self.predictor = predictor
        if task.mode in ("assisted", "observe") and assistant is None:
            raise ValueError(f"{task.mode} trial needs an assistant policy")

        self.n = int(round(task.trial_seconds / cfg.physics.dt))
        self.k = 0
        self.held = 0.0
        self._state = physics.PendulumState(float(theta0), 0.0, 0.0)
        self._buf = TraceBuffer(capacity_hint=self.n // cfg.predictor_stride + 2)
        self._pred_wc = _model_window_config(predictor, _STATE_ONLY)
        self._asst_wc = _model_window_config(assistant, _STATE_ONLY)

        self._prob = float("nan")
        self._asst_held = 0.0
        self._active: Suggestion | None = None
        self._events: list[Suggestion] = []
        self._triples: list = []  # observe mode: (window, agent, human) per lattice tick

        self._cols = np.empty((self.n, 7))
        self._executors = np.empty(self.n, dtype="<U9")
        self._classes = np.empty(self.n, dtype="<U13")
        self._flags = np.zeros(self.n, dtype=bool)
        self._inputs = np.empty(self.n)

        self._seeds = coherence_seeds
        self._frames_sent = 0
        self._frame_mark = -1
        self._crash_since_frame = False

    @property
    def done(self) -> bool:
        return self.k >= self.n

    def set_input(self, deflection: float) -> None:
        self.held = float(np.clip(deflection, -1.0, 1.0))

    def step(self) -> dict | None:
        """Advance one simulation step; returns a frame message when one is due."""
        if self.done:
            raise RuntimeError("trial already finished")
        cfg, task, k = self.cfg, self.task, self.k
        t = k * cfg.physics.dt
        state = self._state
        human = self.held
        on_lattice = k % cfg.predictor_stride == 0

        if on_lattice:
            self._buf.push(t, state.theta, state.omega, 0.0)
            i = len(self._buf) - 1
            if self.predictor is not None:
                self._prob = float(self.predictor(window_at(self._buf, i, self._pred_wc)))
            if self.assistant is not None:
                window = window_at(self._buf, i, self._asst_wc)
                self._asst_held = float(self.assistant.act(window))
                if task.mode == "observe":
                    self._triples.append((window, self._asst_held, human))

        if task.mode == "assisted":
            if gate(self._prob, state.theta, cfg.gating):
                flip = self._active is not None and \
                    self._asst_held * self._active.deflection < 0.0
                if self._active is None or flip:
                    self._active = Suggestion(t, self._asst_held)
                    self._events.append(self._active)
            else:
                self._active = None

        if task.mode == "observe":
            executed = float(np.clip(self._asst_held, -1.0, 1.0))
            pilot_out, asst_out = self._asst_held, human
        else:
            executed = human
            pilot_out = human
            asst_out = self._active.deflection if self._active is not None else float("nan")

        if on_lattice:
            self._buf.set_last_deflection(executed)

        cue = 0 if self._active is None else (1 if self._active.deflection > 0 else -1)
        frame = None
        mark = int(np.floor(t * cfg.broadcast_hz))
        if mark > self._frame_mark:
            self._frame_mark = mark
            frame = {
                "type": "frame",
                "t": t,
                "theta": state.theta,
                "omega": state.omega,
                "coherence_seed": int(self._seeds[self._frames_sent % self._seeds.size]),
                "cue": cue,
                "crash_flag": bool(self._crash_since_frame),
                "trial_index": self.trial_index,
            }
            self._frames_sent += 1
            self._crash_since_frame = False

        out = physics.step(state, executed, cfg.physics)
        self._cols[k] = (t, state.theta, state.omega, executed, self._prob,
                         pilot_out, asst_out)
        self._executors[k] = "pilot"
        self._classes[k] = classify_deflection(state.theta, state.omega, executed)
        self._flags[k] = out.crashed
        self._inputs[k] = human
        if out.crashed:
            self._active = None
            self._crash_since_frame = True
        self._state = out.state
        self.k += 1
        return frame

    def result(self):
        if not self.done:
            raise RuntimeError("trial still in progress")
        log = TrialLog(
            times=self._cols[:, 0], thetas=self._cols[:, 1], omegas=self._cols[:, 2],
            deflections=self._cols[:, 3], crash_probabilities=self._cols[:, 4],
            pilot_deflections=self._cols[:, 5], assistant_deflections=self._cols[:, 6],
            executors=self._executors, deflection_classes=self._classes,
            crash_flags=self._flags, suggestions=self._events,
        )
        return log, self._inputs, self._triples


def make_engine(cfg: ServerConfig, task: Task, task_index: int, trial_in_task: int,
                trial_index: int, models: ModelSet, seed: int) -> TrialEngine:
    """Deterministic per-trial construction: start angle and the per-frame
    coherence seed stream both derive from (seed, task, trial)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, task_index, trial_in_task)))
    theta0 = rng.uniform(-cfg.start_span, cfg.start_span)
    n_frames = int(np.ceil(task.trial_seconds * cfg.broadcast_hz)) + 2
    seeds = np.random.SeedSequence((seed, task_index, trial_in_task, 1)).generate_state(n_frames)
    return TrialEngine(cfg, task, trial_index, models.for_task(task),
                       models.predictor, theta0, seeds)


def run_scripted_session(script: SessionScript, models: ModelSet, cfg: ServerConfig,
                         seed: int, input_fn=None) -> SessionRecord:
    """Offline session driver: no sockets, no pacing.

    input_fn(trial_index, step, t) -> deflection or None to keep the held
    value. The held input starts at zero every trial.
    """
    for task in script.tasks:
        models.for_task(task)  # fail before simulating anything
    record = SessionRecord(script=script, seed=seed)
    g = 0
    for ti, task in enumerate(script.tasks):
        task_triples: list = []
        for tr in range(task.trials):
            engine = make_engine(cfg, task, ti, tr, g, models, seed)
            while not engine.done:
                if input_fn is not None:
                    v = input_fn(g, engine.k, engine.k * cfg.physics.dt)
                    if v is not None:
                        engine.set_input(v)
                engine.step()
            log, inputs, triples = engine.result()
            record.logs.append(log)
            record.inputs.append(inputs)
            record.task_of_trial.append(ti)
            record.metrics.append(trial_metrics(log))
            task_triples += triples
            g += 1
        if task.mode == "observe":
            record.episodes += extract_disagreements(task_triples)
    return record


def replay_session(record: SessionRecord, models: ModelSet, cfg: ServerConfig) -> bool:
    """Re-simulate every recorded trial from its stored input stream and
    compare trajectories bit-exactly."""
    cfg = dataclasses.replace(cfg, pace=0.0)
    for g, log in enumerate(record.logs):
        ti = record.task_of_trial[g]
        task = record.script.tasks[ti]
        trial_in_task = record.task_of_trial[:g].count(ti)
        engine = make_engine(cfg, task, ti, trial_in_task, g, models, record.seed)
        stream = record.inputs[g]
        while not engine.done:
            engine.set_input(stream[engine.k])
            engine.step()
        redone, _, _ = engine.result()
        for lane in ("thetas", "omegas", "deflections", "crash_flags"):
            if not np.array_equal(getattr(log, lane), getattr(redone, lane)):
                return False
    return True


def record_session(record: SessionRecord, out_dir) -> list:
    """Persist a session: metadata always; logs, inputs, and episodes only
    when the session produced trials. Returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    meta = {
        "seed": record.seed,
        "aborted": record.aborted,
        "replay_ok": record.replay_ok,
        "trials": len(record.logs),
        "crashes": record.crashes,
        "episodes": len(record.episodes),
        "task_of_trial": list(record.task_of_trial),
        "tasks": [dataclasses.asdict(t) for t in record.script.tasks],
    }
    meta_path = out_dir / "session.json"
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    written.append(meta_path)

    if record.logs:
        logs_path = out_dir / "trials.csv"
        export_logs(record.logs, "csv", logs_path)
        written += [logs_path, logs_path.with_name(logs_path.name + ".events.jsonl")]

        inputs_path = out_dir / "inputs.csv"
        with inputs_path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("trial,step,deflection\n")
            for g, stream in enumerate(record.inputs):
                for k, v in enumerate(stream):
                    fh.write("%d,%d,%.17g\n" % (g, k, v))
        written.append(inputs_path)

        metrics_path = out_dir / "metrics.json"
        metrics_path.write_text(json.dumps(
            [dataclasses.asdict(m) for m in record.metrics], indent=2) + "\n",
            encoding="utf-8")
        written.append(metrics_path)

    if record.episodes:
        ep_path = out_dir / "episodes.jsonl"
        save_episodes(record.episodes, ep_path)
        written.append(ep_path)
    return written
