"""Performance statistics over trial logs.

Inputs duck-type on the log attributes they need (thetas, omegas,
deflections, crash_flags, and for the suggestion heuristic times +
pilot_deflections + suggestions), so anything log-shaped works, not just
the harness TrialLog.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEAD_BAND = 0.01
DEFLECTION_CLASSES = ("destabilizing", "anticipatory", "corrective", "none")
RECOVERY_ANGLE = 20.0
PROFICIENCY_LABELS = ("Good", "Medium", "Bad")


def classify_deflection(theta: float, omega: float, d: float) -> str:
    """Fig.-2-style partition of one sample into exactly one class.

    A deflection below the dead band is none. Pushing the way the pendulum
    already leans and moves is destabilizing; pushing with the lean while it
    swings back is anticipatory; everything else (including exact zero theta
    or omega) counts as corrective.
    """
    if abs(d) < DEAD_BAND:
        return "none"
    st, sw, sd = np.sign(theta), np.sign(omega), np.sign(d)
    if st != 0 and sw != 0:
        if st == sw == sd:
            return "destabilizing"
        if sd == st and sw == -st:
            return "anticipatory"
    return "corrective"


@dataclass(frozen=True)
class TrialMetrics:
    crashes: int
    pct_destab: float
    pct_anticipatory: float
    mean_abs_theta: float
    sd_theta: float
    mean_abs_vel: float
    rms_vel: float
    recoveries: int

    def __post_init__(self):
        if self.crashes < 0 or self.recoveries < 0:
            raise ValueError("counts cannot be negative")
        for pct in (self.pct_destab, self.pct_anticipatory):
            if not 0.0 <= pct <= 100.0:
                raise ValueError("percentages must lie in [0, 100]")
        if self.rms_vel < 0:
            raise ValueError("rms velocity cannot be negative")


def count_recoveries(thetas, crash_flags) -> int:
    """Maximal excursions beyond the recovery angle that come back inside
    without crashing."""
    out = 0
    outside = False
    for theta, crashed in zip(thetas, crash_flags):
        if crashed:
            outside = False
            continue
        a = abs(theta)
        if not outside and a > RECOVERY_ANGLE:
            outside = True
        elif outside and a < RECOVERY_ANGLE:
            outside = False
            out += 1
    return out


def trial_metrics(log) -> TrialMetrics:
    thetas = np.asarray(log.thetas, dtype=np.float64)
    omegas = np.asarray(log.omegas, dtype=np.float64)
    deflections = np.asarray(log.deflections, dtype=np.float64)
    flags = np.asarray(log.crash_flags, dtype=bool)
    if thetas.size == 0:
        raise ValueError("empty log")

    active = np.abs(deflections) >= DEAD_BAND
    n_active = int(active.sum())
    if n_active:
        classes = [classify_deflection(t, w, d)
                   for t, w, d in zip(thetas[active], omegas[active], deflections[active])]
        pct_destab = 100.0 * classes.count("destabilizing") / n_active
        pct_anticipatory = 100.0 * classes.count("anticipatory") / n_active
    else:
        pct_destab = pct_anticipatory = 0.0

    return TrialMetrics(
        crashes=int(flags.sum()),
        pct_destab=pct_destab,
        pct_anticipatory=pct_anticipatory,
        mean_abs_theta=float(np.abs(thetas).mean()),
        sd_theta=float(thetas.std()),
        mean_abs_vel=float(np.abs(omegas).mean()),
        rms_vel=float(np.sqrt((omegas ** 2).mean())),
        recoveries=count_recoveries(thetas, flags),
    )


@dataclass(frozen=True)
class ScoreInputs:
    mean_abs_theta: float
    crashes: int
    pct_destab: float
    pct_anticipatory: float
    recoveries: int
    max_recoveries: int
    max_crashes: int


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def score(s: ScoreInputs) -> float:
    """Composite per-performer score; ratio terms with a zero cohort maximum
    contribute nothing."""
    return ((60.0 - s.mean_abs_theta) / 60.0
            + (1.0 - s.crashes / 90.0)
            + (1.0 - s.pct_destab / 100.0)
            + s.pct_anticipatory / 100.0
            + _ratio(s.recoveries, s.max_recoveries)
            - _ratio(s.crashes, s.max_crashes))


def score_cohort(metrics_list) -> list:
    """Scores for a batch compared against its own maxima."""
    max_r = max((m.recoveries for m in metrics_list), default=0)
    max_c = max((m.crashes for m in metrics_list), default=0)
    return [score(ScoreInputs(m.mean_abs_theta, m.crashes, m.pct_destab,
                              m.pct_anticipatory, m.recoveries, max_r, max_c))
            for m in metrics_list]


# --- proficiency clustering ----------------------------------------------

_FEATURE_FIELDS = ("crashes", "pct_destab", "pct_anticipatory", "mean_abs_theta",
                   "sd_theta", "mean_abs_vel", "rms_vel", "recoveries")


def _kmeans(x: np.ndarray, k: int, rng, restarts: int = 50):
    n = x.shape[0]
    best = (np.inf, None)
    for _ in range(restarts):
        centers = np.empty((k, x.shape[1]))
        centers[0] = x[rng.integers(n)]
        for j in range(1, k):
            d2 = np.min(((x[:, None, :] - centers[None, :j, :]) ** 2).sum(-1), axis=1)
            total = d2.sum()
            if total == 0:
                centers[j] = x[rng.integers(n)]
                continue
            centers[j] = x[rng.choice(n, p=d2 / total)]
        labels = None
        for _ in range(100):
            d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
            new_labels = d2.argmin(axis=1)
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for j in range(k):
                members = x[labels == j]
                if members.size:
                    centers[j] = members.mean(axis=0)
                else:
                    centers[j] = x[d2.min(axis=1).argmax()]
        inertia = float(d2[np.arange(n), labels].sum())
        if inertia < best[0] - 1e-12:
            best = (inertia, labels.copy())
    return best[1]


def cluster_proficiency(metrics_list, seed) -> list:
    """k=3 clustering of per-model summary metrics; clusters are named
    Good/Medium/Bad by ascending mean raw rms velocity."""
    metrics_list = list(metrics_list)
    if len(metrics_list) < 3:
        raise ValueError("need at least 3 models to form 3 clusters")
    x = np.asarray([[float(getattr(m, f)) for f in _FEATURE_FIELDS] for m in metrics_list])
    if np.allclose(x, x[0]):
        raise ValueError("all feature vectors are identical; clusters are undefined")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    z = (x - mu) / sd

    labels = _kmeans(z, 3, np.random.default_rng(seed))
    rms = x[:, _FEATURE_FIELDS.index("rms_vel")]
    order = np.argsort([rms[labels == j].mean() for j in range(3)])
    name_of = {int(cluster): PROFICIENCY_LABELS[rank] for rank, cluster in enumerate(order)}
    return [name_of[int(c)] for c in labels]


# --- equiprobability curve ------------------------------------------------


def equiprobability_curve(logs, bin_width_deg: float = 5.0) -> list:
    """Per-|theta|-bin class probabilities among active deflections.

    Folding: the coordinate is the unsigned distance from the balance point,
    which re-signs each excursion so positive always points at the boundary
    the pendulum is falling toward. Bins with no active samples are omitted.
    Rows beyond the crash bound (pre-reset crash samples) are not binned.
    """
    if not logs:
        raise ValueError("no logs")
    if bin_width_deg <= 0:
        raise ValueError("bin width must be positive")
    edges = np.arange(0.0, 60.0 + bin_width_deg, bin_width_deg)
    counts = {}
    for log in logs:
        thetas = np.asarray(log.thetas, dtype=np.float64)
        omegas = np.asarray(log.omegas, dtype=np.float64)
        deflections = np.asarray(log.deflections, dtype=np.float64)
        for t, w, d in zip(thetas, omegas, deflections):
            cls = classify_deflection(t, w, d)
            if cls == "none" or abs(t) >= 60.0:
                continue
            b = int(abs(t) // bin_width_deg)
            row = counts.setdefault(b, {"destabilizing": 0, "anticipatory": 0, "corrective": 0})
            row[cls] += 1
    curve = []
    for b in sorted(counts):
        row = counts[b]
        n = sum(row.values())
        curve.append({
            "lo": float(edges[b]),
            "hi": float(edges[b + 1]),
            "n": n,
            "p_destabilizing": row["destabilizing"] / n,
            "p_anticipatory": row["anticipatory"] / n,
            "p_corrective": row["corrective"] / n,
        })
    return curve


# --- followed-suggestion heuristic ---------------------------------------


def followed_rate(log, window_ms: float = 450.0):
    """Fraction of suggestions matched by a same-direction pilot deflection
    within the window. None when the log carries no suggestions."""
    suggestions = list(getattr(log, "suggestions", []))
    if not suggestions:
        return None
    times = np.asarray(log.times, dtype=np.float64)
    pilot = np.asarray(log.pilot_deflections, dtype=np.float64)
    horizon = window_ms / 1000.0
    followed = 0
    for s in suggestions:
        direction = s.direction
        if direction == 0:
            continue
        mask = (times >= s.t_issued) & (times <= s.t_issued + horizon)
        vals = pilot[mask]
        if np.any((np.abs(vals) >= DEAD_BAND) & (np.sign(vals) == direction)):
            followed += 1
    return followed / len(suggestions)


# --- paired Wilcoxon signed-rank test ------------------------------------


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def paired_wilcoxon(scores_a, scores_b) -> tuple:
    """(W, two-sided p). Exact permutation distribution (midranks doubled to
    integers) up to n=25 nonzero differences, normal approximation with tie
    correction beyond."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-D score arrays")
    if a.size < 5:
        raise ValueError("need at least 5 pairs")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise ValueError("all differences are zero")

    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= 25:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        dist = np.zeros(int(doubled.sum()) + 1)
        dist[0] = 1.0
        for r in doubled:
            shifted = np.zeros_like(dist)
            shifted[r:] = dist[: dist.size - r]
            dist = dist + shifted
        tail = dist[: int(round(2.0 * w)) + 1].sum() / (2.0 ** n)
        return w, min(1.0, 2.0 * tail)

    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    mean = n * (n + 1) / 4.0
    var = (n * (n + 1) * (2 * n + 1) - 0.5 * ((tie_counts ** 3 - tie_counts).sum())) / 24.0
    z = (w - mean) / math.sqrt(var)
    return w, math.erfc(abs(z) / math.sqrt(2.0))
