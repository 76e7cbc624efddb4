"""Window labeling semantics, the rank AUC against a brute-force oracle, and
a real training run over a generated three-pilot corpus."""
import numpy as np
import pytest

from vipassist import nnet, physics
from vipassist.crashpred import (
    CrashPredictorSpec,
    TrajectoryArrays,
    label_windows,
    make_predictor,
    predict_crash_prob,
    roc_auc,
    train_crash_predictor,
)
from vipassist.windows import TraceBuffer, window_at

SPEC = CrashPredictorSpec()


def _flat_trajectory(seconds, hz=50.0, crash_times=()):
    n = int(round(seconds * hz))
    t = np.arange(n) / hz
    flags = np.zeros(n, dtype=bool)
    for ct in crash_times:
        flags[int(round(ct * hz))] = True
    return TrajectoryArrays(t, np.zeros(n), np.zeros(n), np.zeros(n), flags)


def test_label_positive_inside_horizon():
    # ends fall on 0.98 + 0.1k; crash at t=10.0
    traj = _flat_trajectory(12.0, crash_times=[10.0])
    by_end = {round(s.t_end, 3): s.label for s in label_windows(traj, SPEC)}
    assert by_end[9.48] == 1
    assert by_end[4.98] == 0
    assert by_end[9.08] == 1  # horizon (9.08, 10.08] catches it
    assert by_end[8.98] == 0  # horizon ends at 9.98, just short


def test_crash_free_trajectory_all_negative():
    samples = label_windows(_flat_trajectory(8.0), SPEC)
    assert samples
    assert all(s.label == 0 for s in samples)


def test_windows_straddling_reset_are_discarded():
    traj = _flat_trajectory(12.0, crash_times=[10.0])
    ends = {round(s.t_end, 3) for s in label_windows(traj, SPEC)}
    # spans [end-0.98, end] containing the crash row at t=10.0 must be absent
    for e in np.round(np.arange(10.08, 10.99, 0.1), 3):
        assert e not in ends
    assert 9.98 in ends  # span stops one row before the crash
    assert 11.08 in ends  # first span fully past the reset


def test_too_short_trajectory_raises():
    with pytest.raises(ValueError, match="shorter"):
        label_windows(_flat_trajectory(0.5), SPEC)


def test_decimation_matches_direct_50hz_and_keeps_dropped_crash():
    hz = 200.0
    n = int(12.0 * hz)
    t = np.arange(n) / hz
    theta = 20.0 * np.sin(0.7 * t)
    omega = np.gradient(theta, t)
    d = 0.3 * np.cos(t)
    flags = np.zeros(n, dtype=bool)
    flags[1201] = True  # t=6.005, not on the 50 Hz grid
    full = TrajectoryArrays(t, theta, omega, d, flags)

    keep = np.arange(0, n, 4)
    dflags = np.zeros(keep.size, dtype=bool)
    for j, idx in enumerate(keep):
        lo = keep[j - 1] + 1 if j else 0
        dflags_any = flags[lo : idx + 1].any()
        dflags[j] = dflags_any
    direct = TrajectoryArrays(t[keep], theta[keep], omega[keep], d[keep], dflags)

    a = label_windows(full, SPEC)
    b = label_windows(direct, SPEC)
    assert len(a) == len(b) > 0
    assert any(s.label == 1 for s in a)  # the dropped-row crash still labels
    for sa, sb in zip(a, b):
        assert sa.label == sb.label
        np.testing.assert_array_equal(sa.window.features(), sb.window.features())


def test_zero_weight_model_outputs_half():
    params = nnet.zeros_like(nnet.init(SPEC.network_spec, 0))
    window = label_windows(_flat_trajectory(3.0), SPEC)[0].window
    assert predict_crash_prob(params, window, SPEC) == 0.5
    assert make_predictor(params, SPEC)(window) == 0.5


def test_predictions_stay_in_unit_interval():
    rng = np.random.default_rng(3)
    params = nnet.init(SPEC.network_spec, 3)
    feats = rng.uniform(-1.5, 1.5, (20_000, 50, 3))
    y, _ = nnet.forward_batch(SPEC.network_spec, params, feats)
    assert np.all((y >= 0.0) & (y <= 1.0))
    one = predict_crash_prob(params, feats[0], SPEC)
    assert 0.0 <= one <= 1.0


def test_predict_rejects_bad_shape():
    params = nnet.zeros_like(nnet.init(SPEC.network_spec, 0))
    with pytest.raises(ValueError, match="feature window"):
        predict_crash_prob(params, np.zeros((50, 2)), SPEC)


def test_roc_auc_against_brute_force():
    rng = np.random.default_rng(0)
    scores = np.round(rng.uniform(0, 1, 60), 1)  # ties on purpose
    labels = rng.integers(0, 2, 60)
    labels[0], labels[1] = 1, 0
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    assert roc_auc(scores, labels) == pytest.approx(wins / (pos.size * neg.size), abs=1e-12)
    assert roc_auc(np.array([0.9, 0.8, 0.1, 0.2]), np.array([1, 1, 0, 0])) == 1.0
    assert roc_auc(np.array([0.5, 0.5, 0.5, 0.5]), np.array([1, 0, 1, 0])) == 0.5
    with pytest.raises(ValueError):
        roc_auc(np.array([0.5]), np.array([1]))


# --- corpus generation and the training run ------------------------------


def _rollout(policy, seconds, seed, hz=50.0):
    rng = np.random.default_rng(seed)
    cfg = physics.PhysicsConfig(dt=1.0 / hz)
    state = physics.PendulumState(rng.uniform(-20, 20), 0.0, 0.0)
    n = int(round(seconds * hz))
    cols = np.zeros((n, 4))
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        d = policy(state, rng)
        out = physics.step(state, d, cfg)
        cols[i] = (out.state.t, out.state.theta, out.state.omega, d)
        flags[i] = out.crashed
        state = out.state
    return TrajectoryArrays(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3], flags)


def _corpus():
    def random_policy(state, rng):
        return float(rng.uniform(-1, 1))

    def expert(state, rng):
        return float(np.clip(-(0.02 * state.theta + 0.008 * state.omega), -1, 1))

    def sloppy(state, rng):
        base = -(0.005 * state.theta + 0.002 * state.omega)
        return float(np.clip(base + rng.normal(0, 0.3), -1, 1))

    samples = []
    for k in range(6):
        samples += label_windows(_rollout(random_policy, 20.0, seed=100 + k), SPEC)
    for k in range(6):
        samples += label_windows(_rollout(expert, 20.0, seed=200 + k), SPEC)
    for k in range(8):
        samples += label_windows(_rollout(sloppy, 20.0, seed=300 + k), SPEC)
    return samples


@pytest.fixture(scope="module")
def trained():
    samples = _corpus()
    params, report = train_crash_predictor(samples, seed=0, epochs=12)
    return samples, params, report


def test_trained_model_separates_classes(trained):
    samples, params, report = trained
    assert report["auc"] >= 0.85
    assert 0.0 <= report["tpr@0.8"] <= 1.0
    assert 0.0 <= report["fpr@0.8"] <= 1.0

    predict = make_predictor(params, SPEC)
    scores = np.array([predict(s.window) for s in samples])
    labels = np.array([s.label for s in samples])
    gap = scores[labels == 1].mean() - scores[labels == 0].mean()
    assert gap >= 0.3


def test_trained_model_spot_probes(trained):
    _, params, _ = trained
    # resting at the balance point: all-zero features
    calm = np.zeros((50, 3))
    assert predict_crash_prob(params, calm, SPEC) < 0.2

    # free fall recorded to its last sample inside the rails
    cfg = physics.PhysicsConfig(dt=0.02)
    state = physics.PendulumState(5.0, 20.0, 0.0)
    buf = TraceBuffer()
    while True:
        nxt = physics.step_raw(state, 0.0, cfg)
        if abs(nxt.theta) >= 55.0:
            break
        state = nxt
        buf.push(state.t, state.theta, state.omega, 0.0)
    window = window_at(buf, len(buf) - 1, SPEC.window_config)
    assert buf.thetas[-1] > 45.0
    assert buf.omegas[-1] > 60.0
    assert predict_crash_prob(params, window, SPEC) > 0.8


def test_training_rejects_single_class():
    samples = label_windows(_flat_trajectory(8.0), SPEC)
    with pytest.raises(ValueError, match="both classes"):
        train_crash_predictor(samples, seed=0, epochs=1)


def test_training_is_seeded(trained):
    samples, _, _ = trained
    small = samples[:400] + [s for s in samples if s.label == 1][:100]
    a, _ = train_crash_predictor(small, seed=5, epochs=1)
    b, _ = train_crash_predictor(small, seed=5, epochs=1)
    np.testing.assert_array_equal(a.data, b.data)
