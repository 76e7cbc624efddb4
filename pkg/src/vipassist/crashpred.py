"""Crash-probability model: a stacked GRU scoring 1 s observation windows.

Windows are labeled against the trajectory they came from: positive when a
crash happens within the horizon after the window ends, discarded when the
window itself straddles a reset (its rows would mix two balance attempts).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nnet
from .windows import ObservationWindow, TraceBuffer, WindowConfig, window_at

PROB_THRESHOLD = 0.8


@dataclass(frozen=True)
class CrashPredictorSpec:
    """Architecture and windowing contract for the predictor."""

    win_seconds: float = 1.0
    horizon: float = 1.0
    hidden: tuple = (32, 32)
    sample_hz: float = 50.0

    def __post_init__(self):
        if self.win_seconds <= 0:
            raise ValueError("window length must be positive")
        if self.horizon <= 0:
            raise ValueError("label horizon must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def window_config(self) -> WindowConfig:
        return WindowConfig(win_size=self.win_seconds, sample_hz=self.sample_hz)

    @property
    def network_spec(self) -> nnet.NetworkSpec:
        return nnet.NetworkSpec("gru", 3, self.hidden, 1, "sigmoid")


@dataclass(frozen=True)
class CrashWindowSample:
    window: ObservationWindow
    label: int
    t_end: float = 0.0


@dataclass(frozen=True)
class TrajectoryArrays:
    """Plain-array view of one logged run; the shape label_windows consumes.

    crash_flags[i] marks a crash detected at sample i (the row after which
    the state was reset). Any trial log with these five columns qualifies.
    """

    times: np.ndarray
    thetas: np.ndarray
    omegas: np.ndarray
    deflections: np.ndarray
    crash_flags: np.ndarray = field(default=None)

    def __post_init__(self):
        arrays = {k: np.asarray(getattr(self, k), dtype=np.float64)
                  for k in ("times", "thetas", "omegas", "deflections")}
        n = arrays["times"].shape[0]
        if any(a.shape != (n,) for a in arrays.values()):
            raise ValueError("trajectory columns must be equal-length 1-D arrays")
        flags = self.crash_flags
        flags = np.zeros(n, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
        if flags.shape != (n,):
            raise ValueError("crash_flags length must match the trajectory")
        for k, a in arrays.items():
            object.__setattr__(self, k, a)
        object.__setattr__(self, "crash_flags", flags)


def _decimated(traj: TrajectoryArrays, target_hz: float) -> TrajectoryArrays:
    """Every k-th row, with crash flags OR-ed over each gap so no crash
    silently disappears."""
    times = traj.times
    if times.shape[0] < 2:
        return traj
    dt = float(np.median(np.diff(times)))
    factor = max(1, int(round((1.0 / dt) / target_hz)))
    if factor == 1:
        return traj
    keep = np.arange(0, times.shape[0], factor)
    flags = np.zeros(keep.shape[0], dtype=bool)
    for j, idx in enumerate(keep):
        lo = keep[j - 1] + 1 if j else 0
        flags[j] = bool(traj.crash_flags[lo : idx + 1].any())
    return TrajectoryArrays(times[keep], traj.thetas[keep], traj.omegas[keep],
                            traj.deflections[keep], flags)


def label_windows(trajectory: TrajectoryArrays, spec: CrashPredictorSpec = CrashPredictorSpec()):
    """Sliding windows with 0.1 s stride, labeled 1 iff a crash lands in
    (t_end, t_end + horizon]. Windows containing a reset are dropped."""
    traj = _decimated(trajectory, spec.sample_hz)
    cfg = spec.window_config
    n_win = cfg.n_steps
    n = traj.times.shape[0]
    if n < n_win:
        raise ValueError(f"trajectory has {n} samples, shorter than the {n_win}-sample window")

    buf = TraceBuffer.from_arrays(traj.times, traj.thetas, traj.omegas, traj.deflections)
    stride = max(1, int(round(0.1 * spec.sample_hz)))
    crash_times = traj.times[traj.crash_flags]
    samples = []
    for end in range(n_win - 1, n, stride):
        start = end - n_win + 1
        if traj.crash_flags[start : end + 1].any():
            continue
        t_end = float(traj.times[end])
        label = int(np.any((crash_times > t_end) & (crash_times <= t_end + spec.horizon)))
        samples.append(CrashWindowSample(window_at(buf, end, cfg), label, t_end))
    return samples


def predict_crash_prob(params: nnet.Parameters, window,
                       spec: CrashPredictorSpec = CrashPredictorSpec()) -> float:
    """Sigmoid score for one window; accepts an ObservationWindow or an
    already-standardized (n, 3) feature array."""
    feats = window.features() if isinstance(window, ObservationWindow) else np.asarray(window, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) feature window, got {feats.shape}")
    y = nnet.forward(spec.network_spec, params, feats)
    return float(y[0])


def make_predictor(params: nnet.Parameters,
                   spec: CrashPredictorSpec = CrashPredictorSpec()):
    """Callable for hot loops: pre-transposed weights, one window per call."""
    runner = nnet.Runner(spec.network_spec, params)

    def predict(window) -> float:
        feats = window.features() if isinstance(window, ObservationWindow) else np.asarray(window, dtype=np.float64)
        return float(runner(feats)[0])

    predict.window_config = spec.window_config
    return predict


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC (tie-aware): the probability a random positive scores
    above a random negative."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs both classes")
    merged = np.concatenate([pos, neg])
    # midranks across ties
    _, inv, counts = np.unique(merged, return_inverse=True, return_counts=True)
    cum = np.cumsum(counts)
    avg_rank = (cum - (counts - 1) / 2.0)[inv]
    r_pos = avg_rank[: pos.size].sum()
    return float((r_pos - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))


def _score_batch(net_spec, params, samples) -> np.ndarray:
    x = np.stack([s.window.features() for s in samples])
    y, _ = nnet.forward_batch(net_spec, params, x)
    return y[:, 0]


def train_crash_predictor(samples, seed, epochs: int = 10, lr: float = 1e-3,
                          batch: int = 128, holdout: float = 0.2,
                          spec: CrashPredictorSpec = CrashPredictorSpec()):
    """Class-balanced BCE training with a stratified holdout.

    Each minibatch draws half its rows from each class (with replacement on
    the minority side). Returns (Parameters, report) where the report carries
    auc, tpr@0.8, fpr@0.8 on the held-out split.
    """
    samples = list(samples)
    labels = np.asarray([s.label for s in samples])
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    if pos_idx.size == 0 or neg_idx.size == 0:
        raise ValueError("training needs windows of both classes")

    rng_seed, init_seed = (seed if isinstance(seed, np.random.SeedSequence)
                           else np.random.SeedSequence(seed)).spawn(2)
    rng = np.random.default_rng(rng_seed)
    net_spec = spec.network_spec
    params = nnet.init(net_spec, init_seed)

    def split(idx):
        idx = idx.copy()
        rng.shuffle(idx)
        n_hold = max(1, int(round(holdout * idx.size)))
        return idx[n_hold:], idx[:n_hold]

    pos_train, pos_hold = split(pos_idx)
    neg_train, neg_hold = split(neg_idx)
    if pos_train.size == 0 or neg_train.size == 0:
        raise ValueError("not enough samples in one class to train after the holdout split")

    x_all = np.stack([s.window.features() for s in samples])
    y_all = labels.astype(np.float64)
    opt = nnet.AdamState.for_params(params, lr=lr)
    half = batch // 2
    updates = max(1, (pos_train.size + neg_train.size) // batch)
    for _ in range(epochs):
        for _ in range(updates):
            idx = np.concatenate([rng.choice(pos_train, half),
                                  rng.choice(neg_train, half)])
            x = x_all[idx]
            targets = y_all[idx][:, None]
            y, cache = nnet.forward_batch(net_spec, params, x, want_cache=True)
            grads, _ = nnet.backward_batch(net_spec, params, cache,
                                           (y - targets) / targets.shape[0])
            nnet.adam_step(params, grads, opt)

    hold_idx = np.concatenate([pos_hold, neg_hold])
    hold = [samples[i] for i in hold_idx]
    scores = _score_batch(net_spec, params, hold)
    hold_labels = y_all[hold_idx]
    flagged = scores >= PROB_THRESHOLD
    n_pos = int((hold_labels == 1).sum())
    n_neg = int((hold_labels == 0).sum())
    report = {
        "auc": roc_auc(scores, hold_labels),
        "tpr@0.8": float(flagged[hold_labels == 1].sum() / n_pos),
        "fpr@0.8": float(flagged[hold_labels == 0].sum() / n_neg),
    }
    return params, report
