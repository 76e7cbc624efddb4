"""Command line: training, simulation, experiments, and the live server.

Every subcommand takes one TOML or JSON config file plus --seed. Exit codes:
0 success, 2 config problem, 3 weight-file problem.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from .. import crashpred, nnet
from ..assistant import Assistant, GatingPolicy
from ..crashpred import CrashPredictorSpec, label_windows, make_predictor, train_crash_predictor
from ..metrics import equiprobability_curve, trial_metrics
from ..physics import PhysicsConfig
from ..pilots import NetPilot, PdPilot, RandomPilot, TWIN_PROFILES, TwinBehavior
from ..rl.bc import train_bc
from ..rl.common import AlgoConfig
from ..rl.ddpg import train_ddpg
from ..rl.env import EnvConfig
from ..rl.sac import train_sac
from ..windows import TraceBuffer, WindowConfig, window_at
from .dataio import export_logs, import_logs, ingest_human_csv, resample
from .experiment import ExperimentConfig, METRIC_FIELDS, run_experiment
from .trial import TrialConfig, run_trial

EXIT_CONFIG = 2
EXIT_MODEL = 3


class ConfigError(Exception):
    pass


class ModelError(Exception):
    pass


def _load_config(path: str) -> dict:
    p = Path(path)
    try:
        if p.suffix == ".toml":
            with p.open("rb") as fh:
                return tomllib.load(fh)
        return json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _load_weights(path: str):
    try:
        return nnet.load(path)
    except FileNotFoundError as exc:
        raise ModelError(f"weight file not found: {path}") from exc
    except nnet.WeightLoadError as exc:
        raise ModelError(str(exc)) from exc


def _trial_config(d: dict) -> TrialConfig:
    try:
        return TrialConfig(
            physics=PhysicsConfig(**d.get("physics", {})),
            trial_seconds=float(d.get("trial_seconds", 30.0)),
            gating=GatingPolicy(**d.get("gating", {})),
            twin_behavior=TwinBehavior(**d.get("twin_behavior", {})),
            start_span=float(d.get("start_span", 5.0)),
            predictor_stride=int(d.get("predictor_stride", 4)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad trial section: {exc}") from exc


def build_pilot(spec: dict):
    kind = _need(spec, "kind")
    if kind == "pd":
        return PdPilot(**{k: spec[k] for k in ("kp", "kd") if k in spec})
    if kind == "random":
        return lambda seq: RandomPilot(seq)
    if kind == "net":
        profile = TWIN_PROFILES.get(spec.get("profile"))
        if profile is None:
            raise ConfigError(f"unknown twin profile {spec.get('profile')!r}")
        net_spec, params = _load_weights(_need(spec, "weights"))
        try:
            return NetPilot(net_spec, params, profile.window_config())
        except ValueError as exc:
            raise ModelError(f"pilot weights do not fit profile windows: {exc}") from exc
    raise ConfigError(f"unknown pilot kind {kind!r}")


def build_assistant(spec) -> Assistant | None:
    if spec in (None, "none") or spec == {}:
        return None
    kind = _need(spec, "kind")
    net_spec, params = _load_weights(_need(spec, "weights"))
    if kind == "dl":
        wc = WindowConfig(
            win_size=float(spec.get("win_seconds", 0.0)),
            include_deflections=bool(spec.get("include_deflections", True)),
            sample_hz=float(spec.get("sample_hz", 50.0)),
        )
    else:
        wc = WindowConfig(win_size=0.0, include_deflections=False)
    try:
        return Assistant(kind, net_spec, params, wc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_predictor(spec):
    if spec in (None, "none", {}):
        return None
    net_spec, params = _load_weights(_need(spec, "weights"))
    pspec = CrashPredictorSpec(
        win_seconds=float(spec.get("win_seconds", 1.0)),
        horizon=float(spec.get("horizon", 1.0)),
    )
    if net_spec != pspec.network_spec:
        raise ModelError("crash predictor weights do not match the predictor layout")
    return make_predictor(params, pspec)


# --- subcommands ----------------------------------------------------------

def cmd_train_rl(cfg: dict, seed: int) -> int:
    algo = str(_need(cfg, "algo")).upper()
    out = _need(cfg, "out")
    total = int(cfg.get("total_steps", 200_000))
    try:
        env = EnvConfig(**cfg.get("env", {}))
        hyper = AlgoConfig(algo=algo, **cfg.get("hyper", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad training section: {exc}") from exc
    if algo == "DDPG":
        result = train_ddpg(env, hyper, seed, total)
    elif algo == "SAC":
        result = train_sac(env, hyper, seed, total)
    else:
        raise ConfigError(f"train-rl understands DDPG or SAC, not {algo!r}")
    nnet.save(result.actor_spec, result.actor, out)
    print(json.dumps({"algo": algo, "steps": result.steps,
                      "eval": result.eval_history[-1] if result.eval_history else None}))
    return 0


def cmd_train_pilot(cfg: dict, seed: int) -> int:
    profile = TWIN_PROFILES.get(_need(cfg, "profile"))
    if profile is None:
        raise ConfigError(f"unknown twin profile {cfg.get('profile')!r}")
    rec = ingest_human_csv(_need(cfg, "demos"))
    if rec.sample_hz != 50.0:
        rec = resample(rec, 50.0)
    wc = profile.window_config()
    buf = TraceBuffer.from_arrays(rec.times, rec.thetas, rec.omegas, rec.deflections)
    demos = [(window_at(buf, i, wc), rec.deflections[i]) for i in range(len(buf))]
    params = train_bc(profile.network_spec(), demos, seed,
                      epochs=int(cfg.get("epochs", 20)), lr=float(cfg.get("lr", 3e-4)))
    nnet.save(profile.network_spec(), params, _need(cfg, "out"))
    print(json.dumps({"profile": profile.proficiency, "demos": len(demos)}))
    return 0


def cmd_train_crashpred(cfg: dict, seed: int) -> int:
    spec = CrashPredictorSpec(
        win_seconds=float(cfg.get("win_seconds", 1.0)),
        horizon=float(cfg.get("horizon", 1.0)),
    )
    samples = []
    for path in _need(cfg, "logs"):
        for log in import_logs(path):
            samples += label_windows(log.to_trajectory(), spec)
    params, report = train_crash_predictor(samples, seed,
                                           epochs=int(cfg.get("epochs", 10)), spec=spec)
    nnet.save(spec.network_spec, params, _need(cfg, "out"))
    print(json.dumps({"windows": len(samples), "report": report}))
    return 0


def cmd_simulate(cfg: dict, seed: int) -> int:
    pilot = build_pilot(_need(cfg, "pilot"))
    if callable(pilot) and not hasattr(pilot, "act"):
        pilot = pilot(np.random.SeedSequence(seed))
    assistant = build_assistant(cfg.get("assistant"))
    predictor = build_predictor(cfg.get("predictor"))
    log = run_trial(pilot, assistant, predictor, _trial_config(cfg.get("trial", {})), seed)
    export_logs([log], cfg.get("format", "csv"), _need(cfg, "out"))
    print(json.dumps({"rows": len(log), "crashes": int(log.crash_flags.sum()),
                      "suggestions": len(log.suggestions)}))
    return 0


def cmd_experiment(cfg: dict, seed: int) -> int:
    out_dir = Path(_need(cfg, "out_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    pilots = {name: build_pilot(spec) for name, spec in _need(cfg, "pilots").items()}
    assistants = {name: build_assistant(spec)
                  for name, spec in _need(cfg, "assistants").items()}
    try:
        exp = ExperimentConfig(
            pilots=pilots, assistants=assistants,
            trials_per_cell=int(cfg.get("trials_per_cell", 3)),
            master_seed=seed,
            trial=_trial_config(cfg.get("trial", {})),
            crash_predictor=build_predictor(cfg.get("predictor")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_experiment(exp)

    fields = list(METRIC_FIELDS)
    with (out_dir / "metrics.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pilot", "assistant", *fields, "error"])
        for c in result.cells:
            vals = ["%.17g" % c.aggregate[f] for f in fields] if c.aggregate \
                else [""] * len(fields)
            w.writerow([c.pilot, c.assistant, *vals, c.error or ""])
    with (out_dir / "deltas.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pilot", "assistant", *fields])
        for row in result.deltas:
            w.writerow([row["pilot"], row["assistant"],
                        *["%.17g" % row[f] for f in fields]])
    if cfg.get("export_logs", False):
        for c in result.cells:
            export_logs(c.logs, "csv", out_dir / f"logs_{c.pilot}_{c.assistant}.csv")
    print(json.dumps({"cells": len(result.cells), "deltas": len(result.deltas)}))
    return 0


def cmd_metrics(cfg: dict, seed: int) -> int:
    logs = import_logs(_need(cfg, "log"))
    rows = [trial_metrics(log).__dict__ for log in logs]
    out = cfg.get("out")
    doc = json.dumps(rows, indent=2)
    if out:
        Path(out).write_text(doc + "\n", encoding="utf-8")
    else:
        print(doc)
    curve_out = cfg.get("curve_out")
    if curve_out:
        curve = equiprobability_curve(logs, float(cfg.get("bin_width_deg", 5.0)))
        with Path(curve_out).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lo", "hi", "n", "p_destabilizing", "p_anticipatory", "p_corrective"])
            for row in curve:
                w.writerow([row["lo"], row["hi"], row["n"], "%.17g" % row["p_destabilizing"],
                            "%.17g" % row["p_anticipatory"], "%.17g" % row["p_corrective"]])
    return 0


def cmd_ingest(cfg: dict, seed: int) -> int:
    rec = ingest_human_csv(_need(cfg, "in"))
    target = cfg.get("target_hz")
    if target:
        rec = resample(rec, float(target))
    with Path(_need(cfg, "out")).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "omega", "deflection"])
        for k in range(len(rec)):
            w.writerow(["%.17g" % rec.times[k], "%.17g" % rec.thetas[k],
                        "%.17g" % rec.omegas[k], "%.17g" % rec.deflections[k]])
    print(json.dumps({"rows": len(rec), "sample_hz": rec.sample_hz}))
    return 0


def _server_config(d: dict):
    from ..liveserver import ServerConfig

    try:
        return ServerConfig(
            physics=PhysicsConfig(**d.get("physics", {})),
            gating=GatingPolicy(**d.get("gating", {})),
            start_span=float(d.get("start_span", 5.0)),
            predictor_stride=int(d.get("predictor_stride", 4)),
            broadcast_hz=float(d.get("broadcast_hz", 60.0)),
            pace=float(d.get("pace", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad server section: {exc}") from exc


def cmd_serve(cfg: dict, seed: int, port: int, out: str | None) -> int:
    from .. import liveserver

    try:
        script = liveserver.script_from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    assistants = {name: build_assistant(spec)
                  for name, spec in cfg.get("assistants", {}).items()}
    models = liveserver.ModelSet(assistants=assistants,
                                 predictor=build_predictor(cfg.get("predictor")))
    server_cfg = _server_config(cfg.get("server", {}))
    try:
        record = liveserver.run_session(script, models, port, seed,
                                        cfg=server_cfg, out_dir=out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"trials": len(record.logs), "crashes": record.crashes,
                      "episodes": len(record.episodes),
                      "aborted": record.aborted, "replay_ok": record.replay_ok}))
    return 0


COMMANDS = {
    "train-rl": cmd_train_rl,
    "train-pilot": cmd_train_pilot,
    "train-crashpred": cmd_train_crashpred,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "metrics": cmd_metrics,
    "ingest": cmd_ingest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vipassist",
                                     description="Pendulum co-performance toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="TOML or JSON config file")
        p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("serve")
    p.add_argument("--script", required=True, help="session script (TOML or JSON)")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for the session record")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.script if args.command == "serve" else args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a table/object")
        if args.command == "serve":
            return cmd_serve(cfg, args.seed, args.port, args.out)
        return COMMANDS[args.command](cfg, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
