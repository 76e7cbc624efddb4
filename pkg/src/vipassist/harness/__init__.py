"""Trial loop, batch experiments, data ingestion, and the command line."""

from .trial import TrialConfig, TrialLog, run_trial
from .experiment import CellResult, ExperimentConfig, ExperimentResult, run_experiment
from .dataio import (HumanRecording, export_logs, import_logs, ingest_human_csv,
                     resample)

__all__ = [
    "TrialConfig", "TrialLog", "run_trial",
    "CellResult", "ExperimentConfig", "ExperimentResult", "run_experiment",
    "HumanRecording", "export_logs", "import_logs", "ingest_human_csv", "resample",
]
