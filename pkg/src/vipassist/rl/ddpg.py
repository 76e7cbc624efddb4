"""Deterministic-policy trainer: one critic, target copies, Gaussian exploration."""
from __future__ import annotations

import numpy as np

from .. import nnet
from .common import AlgoConfig, TrainResult, actor_act_fn, obs_of, polyak_update, record_transition, spawn_seeds
from .env import EnvConfig, env_reset, env_step
from .evaluate import evaluate_policy
from .replay import ReplayBuffer

STABLE_CRASHES = 0
STABLE_MEAN_ABS_THETA = 10.0


def _critic_x(obs: np.ndarray, act: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, act], axis=1)[:, None, :]


def train_ddpg(env_cfg: EnvConfig, algo_cfg: AlgoConfig, seed, total_steps: int,
               eval_every: int = 5000, stop_when_stable: bool = True,
               eval_seeds=(1, 2, 3)) -> TrainResult:
    """Returns the greedy actor once evaluation is stable or steps run out."""
    if total_steps < algo_cfg.batch:
        raise ValueError("total_steps must be at least one batch")
    rng_seed, actor_seed, critic_seed = spawn_seeds(seed, 3)
    rng = np.random.default_rng(rng_seed)

    actor_spec = nnet.NetworkSpec("mlp", 2, algo_cfg.actor_hidden, 1, "tanh")
    critic_spec = nnet.NetworkSpec("mlp", 3, algo_cfg.critic_hidden, 1, "linear")
    actor = nnet.init(actor_spec, actor_seed)
    critic = nnet.init(critic_spec, critic_seed)
    actor_t = actor.copy()
    critic_t = critic.copy()
    actor_opt = nnet.AdamState.for_params(actor, lr=algo_cfg.lr)
    critic_opt = nnet.AdamState.for_params(critic, lr=algo_cfg.lr)
    replay = ReplayBuffer(algo_cfg.buffer_capacity)

    result = TrainResult(actor_spec, actor, 0)
    state = env_reset(env_cfg, rng)
    ep_return = 0.0
    last_losses = (float("nan"), float("nan"))

    for step in range(1, total_steps + 1):
        obs = obs_of(state.theta, state.omega)
        if step <= algo_cfg.warmup_steps:
            action = rng.uniform(-1.0, 1.0)
        else:
            greedy = nnet.forward_batch(actor_spec, actor, obs[None, None, :])[0][0, 0]
            action = float(np.clip(greedy + rng.normal(0.0, algo_cfg.explore_sigma), -1.0, 1.0))
        nxt, r, done = env_step(state, action, env_cfg)
        crashed = abs(nxt.theta) >= env_cfg.physics.crash_bound
        replay.add(obs, action, r, obs_of(nxt.theta, nxt.omega), crashed, done)
        record_transition(result.transitions, state, action, r, nxt, done)
        ep_return += r

        if done:
            result.log.append({
                "step": step, "episode_return": ep_return,
                "critic_loss": last_losses[0], "actor_loss": last_losses[1],
            })
            ep_return = 0.0
            state = env_reset(env_cfg, rng)
        else:
            state = nxt

        if step > algo_cfg.warmup_steps:
            last_losses = _update(algo_cfg, rng, replay, actor_spec, actor, actor_t,
                                  critic_spec, critic, critic_t, actor_opt, critic_opt)

        if eval_every and step % eval_every == 0 and step > algo_cfg.warmup_steps:
            report = evaluate_policy(actor_act_fn(actor_spec, actor), env_cfg, eval_seeds)
            result.eval_history.append({"step": step, "crashes": report.crashes,
                                        "mean_abs_theta": report.mean_abs_theta})
            if (stop_when_stable and report.crashes <= STABLE_CRASHES
                    and report.mean_abs_theta < STABLE_MEAN_ABS_THETA):
                result.steps = step
                break
    else:
        result.steps = total_steps

    result.extras = {"critic_spec": critic_spec, "critic": critic}
    return result


def _update(cfg, rng, replay, actor_spec, actor, actor_t, critic_spec, critic, critic_t,
            actor_opt, critic_opt):
    batch = replay.sample(rng, cfg.batch)
    n = cfg.batch
    mask = 1.0 - batch["crash"]

    a2, _ = nnet.forward_batch(actor_spec, actor_t, batch["nxt"][:, None, :])
    q2, _ = nnet.forward_batch(critic_spec, critic_t, _critic_x(batch["nxt"], a2))
    y = batch["rew"] * cfg.reward_scale + cfg.gamma * mask * q2[:, 0]

    q, cq = nnet.forward_batch(critic_spec, critic, _critic_x(batch["obs"], batch["act"]),
                               want_cache=True)
    diff = q[:, 0] - y
    critic_loss = float(np.mean(diff * diff))
    if not np.isfinite(critic_loss):
        raise RuntimeError("critic loss diverged to a non-finite value")
    g_critic, _ = nnet.backward_batch(critic_spec, critic, cq, (2.0 * diff / n)[:, None])
    nnet.adam_step(critic, g_critic, critic_opt)

    a_pi, ca = nnet.forward_batch(actor_spec, actor, batch["obs"][:, None, :], want_cache=True)
    q_pi, cq_pi = nnet.forward_batch(critic_spec, critic, _critic_x(batch["obs"], a_pi),
                                     want_cache=True)
    actor_loss = float(-np.mean(q_pi))
    _, dx = nnet.backward_batch(critic_spec, critic, cq_pi, np.full((n, 1), -1.0 / n))
    d_pre = nnet.head_pre_grad(actor_spec, ca, dx[:, 0, 2:3])
    g_actor, _ = nnet.backward_batch(actor_spec, actor, ca, d_pre)
    nnet.adam_step(actor, g_actor, actor_opt)

    polyak_update(actor_t, actor, cfg.tau)
    polyak_update(critic_t, critic, cfg.tau)
    return critic_loss, actor_loss
