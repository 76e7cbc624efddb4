"""Pilot x assistant experiment matrix with per-cell aggregation."""
from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from ..metrics import TrialMetrics, trial_metrics
from .trial import TrialConfig, run_trial

METRIC_FIELDS = tuple(f.name for f in dc_fields(TrialMetrics))


@dataclass(frozen=True)
class ExperimentConfig:
    pilots: dict
    assistants: dict
    trials_per_cell: int = 3
    master_seed: int = 0
    trial: TrialConfig = TrialConfig()
    crash_predictor: object = None

    def __post_init__(self) -> None:
        if not self.pilots or not self.assistants:
            raise ValueError("pilot and assistant rosters must be non-empty")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")


@dataclass
class CellResult:
    pilot: str
    assistant: str
    logs: list = field(default_factory=list)
    per_trial: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class ExperimentResult:
    cells: list
    deltas: list

    def cell(self, pilot: str, assistant: str) -> CellResult:
        for c in self.cells:
            if c.pilot == pilot and c.assistant == assistant:
                return c
        raise KeyError(f"no cell ({pilot}, {assistant})")


def _resolve(entry, seed_seq):
    """Roster entries are live models or zero/one-argument factories."""
    if entry is None or hasattr(entry, "act"):
        return entry
    if callable(entry):
        try:
            return entry(seed_seq)
        except TypeError:
            return entry()
    return entry


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Full matrix; a failing cell is recorded and the rest still run.

    Trial seeds are SeedSequence((master_seed, cell_index, trial_index)) so
    any cell or trial can be reproduced in isolation.
    """
    cells = [CellResult(pname, aname)
             for pname in sorted(cfg.pilots)
             for aname in sorted(cfg.assistants)]

    index = 0
    for pname, pentry in sorted(cfg.pilots.items()):
        for aname, aentry in sorted(cfg.assistants.items()):
            cell = cells[index]
            try:
                for ti in range(cfg.trials_per_cell):
                    seq = np.random.SeedSequence((cfg.master_seed, index, ti))
                    pilot = _resolve(pentry, seq)
                    assistant = _resolve(aentry, seq)
                    log = run_trial(pilot, assistant, cfg.crash_predictor, cfg.trial, seq)
                    cell.logs.append(log)
                    cell.per_trial.append(trial_metrics(log))
                cell.aggregate = {
                    f: float(np.mean([getattr(m, f) for m in cell.per_trial]))
                    for f in METRIC_FIELDS
                }
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                cell.error = f"{type(exc).__name__}: {exc}"
            index += 1

    deltas = []
    by_key = {(c.pilot, c.assistant): c for c in cells}
    for pname in sorted(cfg.pilots):
        base = by_key.get((pname, "none"))
        if base is None or base.error or not base.aggregate:
            continue
        for aname in sorted(cfg.assistants):
            if aname == "none":
                continue
            assisted = by_key[(pname, aname)]
            if assisted.error or not assisted.aggregate:
                continue
            row = {"pilot": pname, "assistant": aname}
            row.update({f: assisted.aggregate[f] - base.aggregate[f] for f in METRIC_FIELDS})
            deltas.append(row)
    return ExperimentResult(cells, deltas)
