import numpy as np
import pytest

from vipassist import nnet, physics
from vipassist.rl.airl import (REWARD_CLIP, _expert_arrays, discriminator_logit,
                               discriminator_spec, train_airl)
from vipassist.rl.common import AlgoConfig, sac_mean_act_fn, spawn_seeds
from vipassist.rl.env import EnvConfig
from vipassist.rl.evaluate import evaluate_policy
from vipassist.rl.sac import SacCore

ALGO = AlgoConfig(algo="SAC")
ENV = EnvConfig()


def pd_action(theta, omega):
    return float(np.clip(-(0.02 * theta + 0.008 * omega), -1.0, 1.0))


def rollout_triples(policy, seed, seconds=15.0, start_span=50.0):
    """(n, 3) [theta, omega, deflection] rows from one 50 Hz closed-loop run."""
    rng = np.random.default_rng(seed)
    cfg = physics.PhysicsConfig(dt=ENV.train_dt)
    state = physics.PendulumState(rng.uniform(-start_span, start_span), 0.0, 0.0)
    rows = []
    for _ in range(int(seconds / cfg.dt)):
        d = policy(state.theta, state.omega, rng)
        rows.append((state.theta, state.omega, d))
        state = physics.step(state, d, cfg).state
    return np.asarray(rows)


def pd_corpus(seeds):
    return np.concatenate([
        rollout_triples(lambda t, w, r: pd_action(t, w), s) for s in seeds
    ])


def random_corpus(seeds):
    return np.concatenate([
        rollout_triples(lambda t, w, r: float(r.uniform(-1, 1)), s) for s in seeds
    ])


def test_expert_array_forms_agree():
    arr = pd_corpus([0])[:50]
    pairs = [((t, w), d) for t, w, d in arr]
    obs_a, act_a = _expert_arrays(arr)
    obs_b, act_b = _expert_arrays(pairs)
    assert np.array_equal(obs_a, obs_b) and np.array_equal(act_a, act_b)
    assert obs_a[0, 0] == pytest.approx(arr[0, 0] / 60.0)
    assert obs_a[0, 1] == pytest.approx(arr[0, 1] / 300.0)
    assert act_a.shape == (50, 1)


def test_empty_demos_raise():
    with pytest.raises(ValueError, match="empty"):
        train_airl(ENV, ALGO, [], seed=0, iterations=1)


def test_zero_iterations_returns_fresh_sac_actor():
    demos = pd_corpus([3])[:200]
    res = train_airl(ENV, ALGO, demos, seed=5, iterations=0)
    _, core_seed, _ = spawn_seeds(5, 3)
    fresh = SacCore(ALGO, core_seed)
    assert np.array_equal(res.actor.data, fresh.actor.data)
    assert res.steps == 0


def test_zero_iterations_with_init_actor_copies_weights():
    demos = pd_corpus([3])[:200]
    donor = nnet.init(nnet.NetworkSpec("mlp", 2, ALGO.actor_hidden, 2, "linear"), 99)
    res = train_airl(ENV, ALGO, demos, seed=5, iterations=0, init_actor=donor)
    assert np.array_equal(res.actor.data, donor.data)
    assert res.actor is not donor


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # NaN propagation is the point
def test_divergence_guard_fires_on_absurd_demos():
    bad = np.full((100, 3), np.inf)
    with pytest.raises(RuntimeError, match="diverged"):
        train_airl(ENV, ALGO, bad, seed=0, iterations=1, steps_per_iteration=300)


def test_seeded_determinism():
    demos = pd_corpus([1])[:500]
    algo = AlgoConfig(algo="SAC", warmup_steps=200)
    a = train_airl(ENV, algo, demos, seed=7, iterations=1, steps_per_iteration=600)
    b = train_airl(ENV, algo, demos, seed=7, iterations=1, steps_per_iteration=600)
    assert np.array_equal(a.actor.data, b.actor.data)
    assert a.eval_history == b.eval_history


@pytest.fixture(scope="module")
def airl_result():
    demos = pd_corpus(range(8))
    return train_airl(ENV, ALGO, demos, seed=0, iterations=6)


def test_airl_actor_stays_up(airl_result):
    act = sac_mean_act_fn(airl_result.actor_spec, airl_result.actor)
    report = evaluate_policy(act, ENV)
    assert report.crashes <= 1, report


def test_discriminator_separates_expert_from_random(airl_result):
    spec = airl_result.extras["discriminator_spec"]
    disc = airl_result.extras["discriminator"]
    expert_obs, expert_act = _expert_arrays(pd_corpus([101, 102]))
    rand_obs, rand_act = _expert_arrays(random_corpus([103, 104]))
    e = discriminator_logit(spec, disc, expert_obs, expert_act)
    r = discriminator_logit(spec, disc, rand_obs, rand_act)
    accuracy = ((e > 0).sum() + (r <= 0).sum()) / (e.size + r.size)
    assert accuracy > 0.9, accuracy


def test_airl_training_log_shape(airl_result):
    assert airl_result.steps == 6 * 4000
    assert [row["step"] for row in airl_result.eval_history] == [4000 * k for k in range(1, 7)]
    assert all(np.isfinite(row["disc_loss"]) for row in airl_result.eval_history)
    assert REWARD_CLIP == 10.0


def test_discriminator_spec_shape():
    spec = discriminator_spec(ALGO)
    assert spec.arch == "mlp" and spec.input_dim == 3
    assert spec.hidden_dims == ALGO.critic_hidden and spec.output_activation == "sigmoid"
