"""Log export/import and human recording ingestion.

Exports cover the tabular rows; suggestion events ride in a sidecar next to
the main file (same path + ".events.jsonl") because they are sparse and not
derivable from the rows alone.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..assistant import Suggestion
from .trial import TrialLog

TRIAL_COLUMNS = (
    ("t", "times"),
    ("theta", "thetas"),
    ("omega", "omegas"),
    ("executed_deflection", "deflections"),
    ("crash_probability", "crash_probabilities"),
    ("pilot_deflection", "pilot_deflections"),
    ("assistant_deflection", "assistant_deflections"),
    ("executor", "executors"),
    ("deflection_class", "deflection_classes"),
    ("crash_flag", "crash_flags"),
)
_FLOAT_COLS = 7


def _fmt(v: float) -> str:
    return "%.17g" % v


def export_logs(logs, fmt: str, path) -> None:
    """Write trial rows to one file; trial boundaries are where t restarts
    at 0. Suggestion events go to the ".events.jsonl" sidecar."""
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown export format {fmt!r}")
    path = Path(path)
    names = [c for c, _ in TRIAL_COLUMNS]
    with path.open("w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            writer = csv.writer(fh)
            writer.writerow(names)
            for log in logs:
                for row in _iter_rows(log):
                    writer.writerow(row)
        else:
            for log in logs:
                for row in _iter_rows(log):
                    fh.write(json.dumps(dict(zip(names, row))) + "\n")
    with path.with_name(path.name + ".events.jsonl").open("w", encoding="utf-8") as fh:
        for ti, log in enumerate(logs):
            for s in log.suggestions:
                fh.write(json.dumps({"trial": ti, "t_issued": s.t_issued,
                                     "deflection": s.deflection}) + "\n")


def _iter_rows(log: TrialLog):
    for k in range(len(log)):
        yield (
            _fmt(log.times[k]), _fmt(log.thetas[k]), _fmt(log.omegas[k]),
            _fmt(log.deflections[k]), _fmt(log.crash_probabilities[k]),
            _fmt(log.pilot_deflections[k]), _fmt(log.assistant_deflections[k]),
            str(log.executors[k]), str(log.deflection_classes[k]),
            int(bool(log.crash_flags[k])),
        )


def import_logs(path, fmt: str | None = None) -> list:
    """Inverse of export_logs for the tabular part; events are restored from
    the sidecar when it exists."""
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix == ".jsonl" else "csv"
    names = [c for c, _ in TRIAL_COLUMNS]
    raw: list[list] = []
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        rows = list(csv.reader(text.splitlines()))
        if not rows or rows[0] != names:
            raise ValueError(f"{path} does not carry the trial log header")
        raw = rows[1:]
    else:
        for line in text.splitlines():
            doc = json.loads(line)
            raw.append([doc[c] for c in names])

    logs: list[TrialLog] = []
    bounds = [i for i, row in enumerate(raw) if float(row[0]) == 0.0] + [len(raw)]
    if raw and bounds[0] != 0:
        raise ValueError(f"{path}: first row does not start a trial (t != 0)")
    for a, b in zip(bounds[:-1], bounds[1:]):
        chunk = raw[a:b]
        cols = list(zip(*chunk))
        logs.append(TrialLog(
            *[np.asarray([float(v) for v in cols[j]]) for j in range(_FLOAT_COLS)],
            executors=np.asarray(cols[7], dtype="<U9"),
            deflection_classes=np.asarray(cols[8], dtype="<U13"),
            crash_flags=np.asarray([int(v) for v in cols[9]], dtype=bool),
        ))

    sidecar = path.with_name(path.name + ".events.jsonl")
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            doc = json.loads(line)
            logs[doc["trial"]].suggestions.append(
                Suggestion(doc["t_issued"], doc["deflection"]))
    return logs


# --- human recordings -----------------------------------------------------

KNOWN_RATES = (50.0, 200.0)


@dataclass(frozen=True)
class HumanRecording:
    subject_id: str
    session_id: str
    trial_id: str
    sample_hz: float
    times: np.ndarray
    thetas: np.ndarray
    omegas: np.ndarray
    deflections: np.ndarray

    def __len__(self) -> int:
        return self.times.size


def ingest_human_csv(path) -> HumanRecording:
    """Columns t,theta,omega,deflection; ids come from the optional
    ".meta.json" sidecar, else from the filename."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "theta", "omega", "deflection"]:
        raise ValueError(f"{path}: expected header t,theta,omega,deflection")
    data = np.asarray([[float(v) for v in row] for row in rows[1:]])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: too few samples")
    t = data[:, 0]
    if not np.all(np.diff(t) > 0):
        raise ValueError(f"{path}: time column is not strictly increasing")
    if np.any(np.abs(data[:, 3]) > 1.0):
        raise ValueError(f"{path}: deflections must lie in [-1, 1]")
    spacing = float(np.median(np.diff(t)))
    hz = next((r for r in KNOWN_RATES if abs(1.0 / spacing - r) <= 0.01 * r), None)
    if hz is None:
        raise ValueError(f"{path}: sample spacing {spacing:.6f}s matches neither 50 nor 200 Hz")

    meta = {}
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return HumanRecording(
        subject_id=str(meta.get("subject_id", path.stem)),
        session_id=str(meta.get("session_id", "")),
        trial_id=str(meta.get("trial_id", "")),
        sample_hz=hz,
        times=t, thetas=data[:, 1], omegas=data[:, 2], deflections=data[:, 3],
    )


def resample(recording: HumanRecording, target_hz: float) -> HumanRecording:
    """Linear interpolation for the state lanes; zero-order hold for the
    deflection lane (commands are held between samples, not blended)."""
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    t0, t1 = recording.times[0], recording.times[-1]
    span = t1 - t0
    count = int(round(span * target_hz)) + 1
    if not np.isclose((count - 1) / target_hz, span):
        count = int(np.floor(span * target_hz)) + 1
    times = t0 + np.arange(count) / target_hz
    times[-1] = min(times[-1], t1)
    hold = np.searchsorted(recording.times, times, side="right") - 1
    return HumanRecording(
        subject_id=recording.subject_id,
        session_id=recording.session_id,
        trial_id=recording.trial_id,
        sample_hz=target_hz,
        times=times,
        thetas=np.interp(times, recording.times, recording.thetas),
        omegas=np.interp(times, recording.times, recording.omegas),
        deflections=recording.deflections[np.clip(hold, 0, len(recording) - 1)],
    )
