import numpy as np
import pytest

from vipassist import nnet, physics
from vipassist.pilots import (
    TWIN_PROFILES,
    DelayLine,
    NetPilot,
    PdPilot,
    PendingExecution,
    RandomPilot,
    TwinBehavior,
    TwinProfile,
    pilot_act,
    twin_decide,
    twin_execute,
)
from vipassist.windows import ObservationWindow, TraceBuffer, WindowConfig, build_window


class FakeSuggestion:
    def __init__(self, deflection, t_issued):
        self.deflection = deflection
        self.t_issued = t_issued


def test_behavior_validation():
    TwinBehavior()
    with pytest.raises(ValueError):
        TwinBehavior(accept_prob=1.2)
    with pytest.raises(ValueError):
        TwinBehavior(delay_base=0.04, delay_jitter=0.05)
    with pytest.raises(ValueError):
        TwinBehavior(noise=-0.1)


def test_reject_all_when_accept_prob_zero():
    behavior = TwinBehavior(accept_prob=0.0)
    rng = np.random.default_rng(0)
    for i in range(50):
        executed, executor, pending = twin_execute(
            0.3, FakeSuggestion(0.9, i * 0.005), i * 0.005, behavior, rng
        )
        assert (executed, executor, pending) == (0.3, "pilot", None)


def test_accepted_suggestion_lands_once_after_fixed_delay():
    behavior = TwinBehavior(accept_prob=1.0, delay_jitter=0.0, noise=0.0)
    rng = np.random.default_rng(1)
    pending = FakeSuggestion(0.5, 1.0)
    fired_at = None
    for i in range(400):
        t = i * 0.005
        executed, executor, pending = twin_execute(-0.2, pending, t, behavior, rng)
        if executor == "assistant":
            assert fired_at is None, "suggestion executed twice"
            fired_at = t
            assert executed == pytest.approx(0.5)
        else:
            assert executed == pytest.approx(-0.2)
    assert fired_at is not None
    # first sample at or past 1.0 + 0.4
    assert fired_at == pytest.approx(1.4, abs=1e-9)


def test_decision_is_made_once_per_suggestion():
    behavior = TwinBehavior()
    rng = np.random.default_rng(7)
    decided = twin_decide(0.4, 2.0, behavior, rng)
    if decided is not None:
        state_before = rng.bit_generator.state
        _, _, after = twin_execute(0.0, decided, 2.1, behavior, rng)
        # no further draws once the decision object exists
        assert rng.bit_generator.state == state_before
        assert after is decided or after is None


def test_monte_carlo_acceptance_delay_noise():
    behavior = TwinBehavior()
    rng = np.random.default_rng(42)
    accepted = 0
    n = 10_000
    for i in range(n):
        decided = twin_decide(0.2, float(i), behavior, rng)
        if decided is None:
            continue
        accepted += 1
        assert 0.35 <= decided.delay <= 0.45
        assert -0.05 <= decided.noise <= 0.05
        assert decided.due == pytest.approx(i + decided.delay)
    assert 0.77 <= accepted / n <= 0.83


def test_seeded_executor_sequence_reproduces():
    behavior = TwinBehavior()

    def run(seed):
        rng = np.random.default_rng(seed)
        pending = None
        executors = []
        for i in range(2000):
            t = i * 0.02
            if i % 40 == 0:
                pending = FakeSuggestion(0.5 if (i // 40) % 2 == 0 else -0.5, t)
            executed, executor, pending = twin_execute(0.1, pending, t, behavior, rng)
            executors.append(executor)
        return executors

    assert run(3) == run(3)
    assert run(3) != run(4)


def test_executed_value_always_in_bounds():
    behavior = TwinBehavior(accept_prob=1.0)
    rng = np.random.default_rng(9)
    for i in range(500):
        decided = twin_decide(0.99, 0.0, behavior, rng)
        assert -1.0 <= decided.execute_value <= 1.0
    executed, _, _ = twin_execute(1.5, None, 0.0, behavior, rng)
    assert executed == 1.0


def test_delay_line_zero_future_is_passthrough():
    line = DelayLine(0.0)
    line.push(0.0, 0.7)
    assert line.value_at(0.0) == 0.7


def test_delay_line_shifts_by_future_exactly():
    line = DelayLine(0.1)
    dt = 0.02
    issued = [np.sin(i) for i in range(50)]
    executed = []
    for i in range(50):
        t = i * dt
        line.push(t, issued[i])
        executed.append(line.value_at(t))
    # five-step lead at 50 Hz; zero before the first scheduled action lands
    assert executed[:5] == [0.0] * 5
    assert executed[5:] == pytest.approx(issued[:45])


def test_twin_profiles_registry():
    assert set(TWIN_PROFILES) == {"Good", "Medium", "Bad"}
    good, medium, bad = (TWIN_PROFILES[k] for k in ("Good", "Medium", "Bad"))
    assert (good.arch, good.win_size, good.future) == ("lstm", 0.2, 0.0)
    assert (medium.arch, medium.win_size, medium.future) == ("gru", 0.3, 0.1)
    assert (bad.arch, bad.win_size, bad.future) == ("mlp", 0.5, 0.0)
    assert all(p.source == "MARS" for p in TWIN_PROFILES.values())
    with pytest.raises(ValueError):
        TwinProfile("Good", "lstm", 0.2, 0.0, source="SIM")


def test_profile_network_specs():
    spec = TWIN_PROFILES["Bad"].network_spec()
    assert (spec.arch, spec.input_dim, spec.hidden_dims) == ("mlp", 75, (64, 64))
    spec = TWIN_PROFILES["Good"].network_spec()
    assert (spec.arch, spec.input_dim, spec.hidden_dims) == ("lstm", 3, (32,))
    spec = TWIN_PROFILES["Medium"].network_spec()
    assert (spec.arch, spec.input_dim, spec.hidden_dims) == ("gru", 3, (32,))


def test_zero_weight_pilot_outputs_zero():
    profile = TWIN_PROFILES["Good"]
    spec = profile.network_spec()
    params = nnet.zeros_like(nnet.init(spec, seed=0))
    cfg = profile.window_config()
    window = ObservationWindow((5.0,) * 10, (1.0,) * 10, (0.2,) * 10)
    assert pilot_act(spec, params, window, cfg) == 0.0


def test_pilot_output_bounded_over_random_windows():
    cfg = WindowConfig(0.5, 0.0, True, 50)
    spec = nnet.NetworkSpec("mlp", cfg.input_dim("mlp"), (64, 64), 1, "tanh")
    params = nnet.init(spec, seed=5)
    rng = np.random.default_rng(0)
    flat = np.empty((100_000, 1, cfg.n_steps * 3))
    raw = np.empty((100_000, cfg.n_steps, 3))
    raw[:, :, 0] = rng.uniform(-60, 60, size=(100_000, cfg.n_steps))
    raw[:, :, 1] = rng.uniform(-300, 300, size=(100_000, cfg.n_steps))
    raw[:, :, 2] = rng.uniform(-1, 1, size=(100_000, cfg.n_steps))
    scaled = raw / np.array([60.0, 300.0, 1.0])
    flat[:, 0, :] = scaled.reshape(100_000, -1)
    y, _ = nnet.forward_batch(spec, params, flat)
    assert np.abs(y).max() <= 1.0
    # spot-check the batched sweep agrees with the public single-window path
    w = ObservationWindow(raw[0, :, 0], raw[0, :, 1], raw[0, :, 2])
    assert pilot_act(spec, params, w, cfg) == pytest.approx(float(y[0, 0]), abs=1e-12)


def test_pilot_act_stable_across_save_load(tmp_path):
    profile = TWIN_PROFILES["Medium"]
    spec = profile.network_spec()
    params = nnet.init(spec, seed=11)
    cfg = profile.window_config()
    window = ObservationWindow(
        np.linspace(-10, 10, cfg.n_steps),
        np.linspace(-50, 50, cfg.n_steps),
        np.linspace(-0.5, 0.5, cfg.n_steps),
    )
    before = pilot_act(spec, params, window, cfg)
    path = tmp_path / "twin.json"
    nnet.save(spec, params, path)
    spec2, params2 = nnet.load(path)
    assert pilot_act(spec2, params2, window, cfg) == before


def test_pilot_dimension_mismatch_rejected():
    cfg = WindowConfig(0.2, 0.0, True, 50)
    spec = nnet.NetworkSpec("lstm", 2, (8,), 1, "tanh")
    params = nnet.init(spec, seed=0)
    with pytest.raises(ValueError, match="input_dim"):
        NetPilot(spec, params, cfg)
    good = nnet.NetworkSpec("lstm", 3, (8,), 1, "tanh")
    pilot = NetPilot(good, nnet.init(good, seed=0), cfg)
    with pytest.raises(ValueError, match="deflection"):
        pilot.act(ObservationWindow((0.0,) * 10, (0.0,) * 10))
    with pytest.raises(ValueError):
        pilot.act(ObservationWindow((0.0,) * 4, (0.0,) * 4, (0.0,) * 4))


def test_pd_pilot_formula_and_stability():
    pd = PdPilot()
    w = ObservationWindow((10.0,), (0.0,))
    assert pd.act(w) == pytest.approx(-0.2)
    w = ObservationWindow((-60.0,), (-300.0,))
    assert pd.act(w) == 1.0

    cfg = physics.PhysicsConfig()
    state = physics.PendulumState(5.0, 0.0)
    buf = TraceBuffer()
    crashed = False
    deflection = 0.0
    for i in range(2000):
        if i % 4 == 0:  # pilot ticks at 50 Hz
            buf.push(state.t, state.theta, state.omega)
            deflection = pd.act(build_window(buf, state.t, pd.config))
            buf.set_last_deflection(deflection)
        out = physics.step(state, deflection, cfg)
        crashed = crashed or out.crashed
        state = out.state
    assert not crashed
    assert abs(state.theta) < 1.0


def test_random_pilot_seeded():
    a = RandomPilot(seed=3)
    b = RandomPilot(seed=3)
    w = ObservationWindow((0.0,), (0.0,))
    seq_a = [a.act(w) for _ in range(20)]
    seq_b = [b.act(w) for _ in range(20)]
    assert seq_a == seq_b
    assert all(-1.0 <= v <= 1.0 for v in seq_a)
    assert len(set(seq_a)) > 1
