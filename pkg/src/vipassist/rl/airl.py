"""Adversarial imitation: a state-action discriminator drives a SAC generator.

The discriminator is a sigmoid MLP over (scaled state, action) trained with
BCE to put expert pairs at 1 and generator pairs at 0. The generator never
sees the task reward; its reward is the discriminator's pre-sigmoid logit,
which equals log D - log(1 - D).
"""
from __future__ import annotations

import numpy as np

from .. import nnet
from .common import AlgoConfig, TrainResult, obs_of, record_transition, spawn_seeds
from .env import EnvConfig, env_reset, env_step
from .replay import ReplayBuffer
from .sac import SacCore

REWARD_CLIP = 10.0


def _expert_arrays(expert_demos) -> tuple[np.ndarray, np.ndarray]:
    """Accepts an (n, 3) array of [theta, omega, deflection] rows or any
    iterable of ((theta, omega), deflection) pairs; returns scaled obs and
    actions ready for the discriminator."""
    if isinstance(expert_demos, np.ndarray) and expert_demos.ndim == 2 and expert_demos.shape[1] == 3:
        arr = expert_demos.astype(np.float64)
    else:
        arr = np.asarray([(float(s[0]), float(s[1]), float(a)) for s, a in expert_demos],
                         dtype=np.float64).reshape(-1, 3)
    if arr.shape[0] == 0:
        raise ValueError("empty expert demonstrations")
    obs = np.column_stack([arr[:, 0] / 60.0, arr[:, 1] / 300.0])
    return obs, arr[:, 2:3].copy()


def discriminator_spec(algo_cfg: AlgoConfig) -> nnet.NetworkSpec:
    return nnet.NetworkSpec("mlp", 3, algo_cfg.critic_hidden, 1, "sigmoid")


def discriminator_logit(spec: nnet.NetworkSpec, params: nnet.Parameters,
                        obs: np.ndarray, act: np.ndarray) -> np.ndarray:
    """log D - log(1 - D) for (n,2) scaled obs and (n,1) actions: the head
    pre-activation of the sigmoid, read off directly for stability."""
    x = np.concatenate([obs, act], axis=1)[:, None, :]
    _, cache = nnet.forward_batch(spec, params, x, want_cache=True)
    return cache["head_pre"][:, 0]


def _disc_update(spec, params, opt, x, labels) -> float:
    y, cache = nnet.forward_batch(spec, params, x, want_cache=True)
    z = cache["head_pre"]
    with np.errstate(over="ignore", invalid="ignore"):  # non-finite caught below
        per = (np.logaddexp(0.0, z) - labels * z).sum(axis=1)
    loss = float(per.mean())
    if not np.isfinite(loss):
        raise RuntimeError("discriminator loss diverged to a non-finite value")
    grads, _ = nnet.backward_batch(spec, params, cache, (y - labels) / labels.shape[0])
    nnet.adam_step(params, grads, opt)
    return loss


def train_airl(env_cfg: EnvConfig, algo_cfg: AlgoConfig, expert_demos, seed,
               iterations: int, steps_per_iteration: int = 4000,
               disc_updates: int = 1024, disc_batch: int = 256,
               init_actor=None) -> TrainResult:
    """Alternating rounds of generator collection/updates and discriminator
    refits. Returns the generator's actor; the discriminator rides along in
    extras. Zero iterations returns the freshly initialized actor untouched
    (or init_actor's copy when continuing from existing weights).
    """
    expert_obs, expert_act = _expert_arrays(expert_demos)
    rng_seed, core_seed, disc_seed = spawn_seeds(seed, 3)
    rng = np.random.default_rng(rng_seed)
    core = SacCore(algo_cfg, core_seed, reward_scale=1.0, reward_clip=REWARD_CLIP)
    if init_actor is not None:
        core.actor.data[...] = init_actor.data
        core.actor_opt = nnet.AdamState.for_params(core.actor, lr=algo_cfg.lr)
    d_spec = discriminator_spec(algo_cfg)
    disc = nnet.init(d_spec, disc_seed)
    disc_opt = nnet.AdamState.for_params(disc, lr=algo_cfg.lr)

    result = TrainResult(core.actor_spec, core.actor, 0)
    result.extras = {"core": core, "discriminator": disc, "discriminator_spec": d_spec}
    if iterations == 0:
        return result

    def learned_reward(obs, act):
        return discriminator_logit(d_spec, disc, obs, act)

    replay = ReplayBuffer(algo_cfg.buffer_capacity)
    state = env_reset(env_cfg, rng)
    total = 0
    for _ in range(iterations):
        for _ in range(steps_per_iteration):
            total += 1
            obs = obs_of(state.theta, state.omega)
            if total <= algo_cfg.warmup_steps:
                action = rng.uniform(-1.0, 1.0)
            else:
                action = core.explore_action(state.theta, state.omega, rng)
            nxt, _, done = env_step(state, action, env_cfg)
            crashed = abs(nxt.theta) >= env_cfg.physics.crash_bound
            replay.add(obs, action, 0.0, obs_of(nxt.theta, nxt.omega), crashed, done)
            record_transition(result.transitions, state, action, 0.0, nxt, done)
            state = env_reset(env_cfg, rng) if done else nxt
            if total > algo_cfg.warmup_steps:
                losses = core.update(replay.sample(rng, algo_cfg.batch), rng,
                                     reward_fn=learned_reward)
                if total % 1000 == 0:
                    result.log.append({"step": total, "episode_return": float("nan"),
                                       "critic_loss": losses["critic_loss"],
                                       "actor_loss": losses["actor_loss"]})

        half = disc_batch // 2
        loss = float("nan")
        for _ in range(disc_updates):
            gen = replay.sample(rng, half)
            ei = rng.integers(0, expert_obs.shape[0], size=half)
            x = np.concatenate([
                np.concatenate([expert_obs[ei], expert_act[ei]], axis=1),
                np.concatenate([gen["obs"], gen["act"]], axis=1),
            ])[:, None, :]
            labels = np.concatenate([np.ones((half, 1)), np.zeros((half, 1))])
            loss = _disc_update(d_spec, disc, disc_opt, x, labels)
        result.eval_history.append({"step": total, "disc_loss": loss})

    result.steps = total
    return result
