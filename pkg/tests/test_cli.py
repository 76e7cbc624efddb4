"""The vipassist command line: configs, exit codes, file outputs."""
import csv
import json

import numpy as np
import pytest

from vipassist import nnet
from vipassist.harness.cli import EXIT_CONFIG, EXIT_MODEL, main
from vipassist.harness import import_logs
from vipassist.pilots import TWIN_PROFILES


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_unparseable_config_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text("pilot = {kind = ", encoding="utf-8")
    assert main(["simulate", str(path)]) == EXIT_CONFIG


def test_missing_required_key_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"pilot": {"kind": "pd"}})  # no "out"
    assert main(["simulate", cfg]) == EXIT_CONFIG
    assert "out" in capsys.readouterr().err


def test_unknown_pilot_kind_exits_2(tmp_path):
    cfg = write_cfg(tmp_path, {"pilot": {"kind": "psychic"}, "out": str(tmp_path / "x.csv")})
    assert main(["simulate", cfg]) == EXIT_CONFIG


def test_missing_weights_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {
        "pilot": {"kind": "net", "profile": "Bad", "weights": str(tmp_path / "none.json")},
        "out": str(tmp_path / "x.csv"),
    })
    assert main(["simulate", cfg]) == EXIT_MODEL
    assert "weight file" in capsys.readouterr().err


def test_wrong_predictor_weights_exit_3(tmp_path):
    spec = nnet.NetworkSpec("mlp", 2, (4,), 1, "tanh")
    wpath = tmp_path / "w.json"
    nnet.save(spec, nnet.init(spec, np.random.default_rng(0)), wpath)
    cfg = write_cfg(tmp_path, {
        "pilot": {"kind": "pd"},
        "predictor": {"weights": str(wpath)},
        "out": str(tmp_path / "x.csv"),
    })
    assert main(["simulate", cfg]) == EXIT_MODEL


def test_simulate_writes_a_log(tmp_path, capsys):
    out = tmp_path / "run.csv"
    cfg = write_cfg(tmp_path, {
        "pilot": {"kind": "pd"},
        "trial": {"trial_seconds": 2.0},
        "out": str(out),
    })
    assert main(["simulate", cfg, "--seed", "3"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == 400
    logs = import_logs(out)
    assert len(logs) == 1 and len(logs[0]) == 400


def test_simulate_same_seed_is_byte_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        cfg = write_cfg(tmp_path, {
            "pilot": {"kind": "random"},
            "trial": {"trial_seconds": 3.0, "start_span": 30.0},
            "out": str(out),
        }, name=name + ".json")
        assert main(["simulate", cfg, "--seed", "17"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_simulate_toml_config(tmp_path, capsys):
    out = tmp_path / "run.csv"
    path = tmp_path / "cfg.toml"
    path.write_text(
        f'out = "{out}"\n[pilot]\nkind = "pd"\n[trial]\ntrial_seconds = 1.0\n',
        encoding="utf-8")
    assert main(["simulate", str(path)]) == 0
    assert out.exists()


def test_experiment_writes_matrix_files(tmp_path, capsys):
    out_dir = tmp_path / "exp"
    cfg = write_cfg(tmp_path, {
        "pilots": {"pd": {"kind": "pd"}, "random": {"kind": "random"}},
        "assistants": {"none": "none"},
        "trials_per_cell": 2,
        "trial": {"trial_seconds": 2.0, "start_span": 20.0},
        "out_dir": str(out_dir),
    })
    assert main(["experiment", cfg, "--seed", "1"]) == 0
    with (out_dir / "metrics.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["pilot", "assistant"]
    assert len(rows) == 3  # header + 2 cells
    assert (out_dir / "deltas.csv").exists()


def test_metrics_command_reports_per_trial(tmp_path, capsys):
    log_path = tmp_path / "run.csv"
    sim = write_cfg(tmp_path, {
        "pilot": {"kind": "pd"},
        "trial": {"trial_seconds": 2.0},
        "out": str(log_path),
    }, name="sim.json")
    assert main(["simulate", sim]) == 0
    capsys.readouterr()

    out = tmp_path / "metrics.json"
    cfg = write_cfg(tmp_path, {"log": str(log_path), "out": str(out)}, name="m.json")
    assert main(["metrics", cfg]) == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 1
    assert rows[0]["crashes"] == 0


def test_ingest_command_resamples(tmp_path, capsys):
    src = tmp_path / "human.csv"
    t = np.arange(101) / 50.0
    lines = ["t,theta,omega,deflection"]
    for k in range(101):
        lines.append(f"{t[k]:.6f},{2.0 * t[k]:.6f},0,0.5")
    src.write_text("\n".join(lines) + "\n", encoding="utf-8")

    out = tmp_path / "resampled.csv"
    cfg = write_cfg(tmp_path, {"in": str(src), "out": str(out), "target_hz": 200})
    assert main(["ingest", cfg]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {"rows": 401, "sample_hz": 200.0}
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "theta", "omega", "deflection"]
    assert len(rows) == 402


def test_train_pilot_command_fits_a_twin(tmp_path, capsys):
    src = tmp_path / "demo.csv"
    t = np.arange(400) / 50.0
    lines = ["t,theta,omega,deflection"]
    for k in range(400):
        lines.append("%.6f,%.6f,%.6f,%.6f" % (
            t[k], 10 * np.sin(t[k]), 10 * np.cos(t[k]),
            np.clip(-0.02 * 10 * np.sin(t[k]), -1, 1)))
    src.write_text("\n".join(lines) + "\n", encoding="utf-8")

    out = tmp_path / "twin.json"
    cfg = write_cfg(tmp_path, {"profile": "Bad", "demos": str(src),
                               "out": str(out), "epochs": 2})
    assert main(["train-pilot", cfg, "--seed", "0"]) == 0
    spec, params = nnet.load(out)
    assert spec == TWIN_PROFILES["Bad"].network_spec()


def test_unknown_command_is_an_argparse_error():
    with pytest.raises(SystemExit):
        main(["transmogrify", "x.json"])


def test_serve_rejects_scriptless_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"tasks": []})
    assert main(["serve", "--script", cfg, "--port", "0"]) == EXIT_CONFIG
    assert "tasks" in capsys.readouterr().err


def test_serve_rejects_unknown_assistant(tmp_path):
    cfg = write_cfg(tmp_path, {"tasks": [
        {"mode": "assisted", "trials": 1, "assistant": "ghost"}]})
    assert main(["serve", "--script", cfg, "--port", "0"]) == EXIT_CONFIG


def test_serve_runs_a_session_end_to_end(tmp_path, capsys):
    import asyncio
    import threading

    from websockets.asyncio.client import connect
    from websockets.exceptions import ConnectionClosed

    port = 23741
    out_dir = tmp_path / "session"
    cfg = write_cfg(tmp_path, {
        "tasks": [{"mode": "solo", "trials": 1, "trial_seconds": 0.5}],
        "server": {"pace": 0.0},
    })
    result = {}

    def run_server():
        result["code"] = main(["serve", "--script", cfg, "--port", str(port),
                               "--seed", "21", "--out", str(out_dir)])

    thread = threading.Thread(target=run_server)
    thread.start()

    async def client():
        for _ in range(100):
            try:
                ws = await connect(f"ws://localhost:{port}")
                break
            except OSError:
                await asyncio.sleep(0.05)
        else:
            raise RuntimeError("server never came up")
        async with ws:
            await ws.send(json.dumps({"type": "ready"}))
            while True:
                msg = json.loads(await ws.recv())
                if msg["type"] == "session_end":
                    return msg["summary"]

    summary = asyncio.run(client())
    thread.join(timeout=30)
    assert not thread.is_alive() and result["code"] == 0
    assert summary["trials"] == 1 and summary["replay_ok"] is True
    printed = json.loads(capsys.readouterr().out)
    assert printed["replay_ok"] is True
    assert (out_dir / "trials.csv").exists()
