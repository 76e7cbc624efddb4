"""Squashed-Gaussian actor-critic with twin critics and learned temperature.

The actor head is linear with two outputs per action: mean and log-std. The
log-std is clamped to [-5, 2] with zero gradient outside the clamp. All the
reparameterization algebra is written out by hand against the nnet caches;
the test suite pins it to finite differences.
"""
from __future__ import annotations

import math

import numpy as np

from .. import nnet
from .common import AlgoConfig, TrainResult, obs_of, polyak_update, record_transition, sac_mean_act_fn, spawn_seeds
from .ddpg import STABLE_CRASHES, STABLE_MEAN_ABS_THETA, _critic_x
from .env import EnvConfig, env_reset, env_step
from .evaluate import evaluate_policy
from .replay import ReplayBuffer

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQUASH_EPS = 1e-6


class SacCore:
    """Networks, optimizers, and update rule; the loops live elsewhere."""

    def __init__(self, algo_cfg: AlgoConfig, seed, reward_scale: float = None,
                 reward_clip: float = None):
        self.cfg = algo_cfg
        self.reward_scale = algo_cfg.reward_scale if reward_scale is None else reward_scale
        self.reward_clip = reward_clip
        actor_seed, c1_seed, c2_seed = spawn_seeds(seed, 3)
        self.actor_spec = nnet.NetworkSpec("mlp", 2, algo_cfg.actor_hidden, 2, "linear")
        self.critic_spec = nnet.NetworkSpec("mlp", 3, algo_cfg.critic_hidden, 1, "linear")
        self.actor = nnet.init(self.actor_spec, actor_seed)
        # start the noise head near the entropy target; with the default
        # sigma ~ 1 the temperature collapses before the mean sharpens
        self.actor[f"b{len(algo_cfg.actor_hidden)}"][0, 1] = -1.0
        self.critic1 = nnet.init(self.critic_spec, c1_seed)
        self.critic2 = nnet.init(self.critic_spec, c2_seed)
        self.critic1_t = self.critic1.copy()
        self.critic2_t = self.critic2.copy()
        self.actor_opt = nnet.AdamState.for_params(self.actor, lr=algo_cfg.lr)
        self.c1_opt = nnet.AdamState.for_params(self.critic1, lr=algo_cfg.lr)
        self.c2_opt = nnet.AdamState.for_params(self.critic2, lr=algo_cfg.lr)
        self.log_alpha = nnet.Parameters(np.zeros(1), (("log_alpha", 1, 1),))
        self.alpha_opt = nnet.AdamState.for_params(self.log_alpha, lr=algo_cfg.lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data[0]))

    def _policy(self, obs: np.ndarray, want_cache: bool = False):
        head, cache = nnet.forward_batch(self.actor_spec, self.actor, obs[:, None, :],
                                         want_cache=want_cache)
        mu = head[:, 0:1]
        log_std_raw = head[:, 1:2]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std, log_std_raw, cache

    def explore_action(self, theta: float, omega: float, rng) -> float:
        mu, log_std, _, _ = self._policy(obs_of(theta, omega)[None, :])
        u = mu[0, 0] + math.exp(log_std[0, 0]) * rng.standard_normal()
        return float(np.tanh(u))

    def mean_action(self, theta: float, omega: float) -> float:
        mu, _, _, _ = self._policy(obs_of(theta, omega)[None, :])
        return float(np.tanh(mu[0, 0]))

    def _sample(self, mu, log_std, eps):
        sigma = np.exp(log_std)
        u = mu + sigma * eps
        a = np.tanh(u)
        logp = (-0.5 * eps * eps - log_std - _HALF_LOG_2PI
                - np.log(1.0 - a * a + _SQUASH_EPS))
        return a, logp

    def update(self, batch: dict, rng, reward_fn=None) -> dict:
        cfg = self.cfg
        n = batch["obs"].shape[0]
        mask = (1.0 - batch["crash"])[:, None]
        rew = batch["rew"] if reward_fn is None else reward_fn(batch["obs"], batch["act"])
        rew = rew * self.reward_scale
        if self.reward_clip is not None:
            rew = np.clip(rew, -self.reward_clip, self.reward_clip)
        alpha = self.alpha

        mu2, log_std2, _, _ = self._policy(batch["nxt"])
        a2, logp2 = self._sample(mu2, log_std2, rng.standard_normal((n, 1)))
        q1t, _ = nnet.forward_batch(self.critic_spec, self.critic1_t, _critic_x(batch["nxt"], a2))
        q2t, _ = nnet.forward_batch(self.critic_spec, self.critic2_t, _critic_x(batch["nxt"], a2))
        y = rew[:, None] + cfg.gamma * mask * (np.minimum(q1t, q2t) - alpha * logp2)

        critic_loss = 0.0
        for critic, opt in ((self.critic1, self.c1_opt), (self.critic2, self.c2_opt)):
            q, cq = nnet.forward_batch(self.critic_spec, critic,
                                       _critic_x(batch["obs"], batch["act"]), want_cache=True)
            diff = q - y
            critic_loss += float(np.mean(diff * diff))
            g, _ = nnet.backward_batch(self.critic_spec, critic, cq, 2.0 * diff / n)
            nnet.adam_step(critic, g, opt)
        if not np.isfinite(critic_loss):
            raise RuntimeError("critic loss diverged to a non-finite value")

        mu, log_std, log_std_raw, ca = self._policy(batch["obs"], want_cache=True)
        eps = rng.standard_normal((n, 1))
        a, logp = self._sample(mu, log_std, eps)
        q1, c1 = nnet.forward_batch(self.critic_spec, self.critic1, _critic_x(batch["obs"], a),
                                    want_cache=True)
        q2, c2 = nnet.forward_batch(self.critic_spec, self.critic2, _critic_x(batch["obs"], a),
                                    want_cache=True)
        qmin = np.minimum(q1, q2)
        actor_loss = float(np.mean(alpha * logp - qmin))
        pick1 = (q1 <= q2).astype(float)
        _, dx1 = nnet.backward_batch(self.critic_spec, self.critic1, c1, -pick1 / n)
        _, dx2 = nnet.backward_batch(self.critic_spec, self.critic2, c2, -(1.0 - pick1) / n)
        dq_da = dx1[:, 0, 2:3] + dx2[:, 0, 2:3]

        da = alpha * (2.0 * a / (1.0 - a * a + _SQUASH_EPS)) / n + dq_da
        du = da * (1.0 - a * a)
        d_mu = du
        d_log_std = du * np.exp(log_std) * eps - alpha / n
        in_clamp = ((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)).astype(float)
        d_head = np.concatenate([d_mu, d_log_std * in_clamp], axis=1)
        g_actor, _ = nnet.backward_batch(self.actor_spec, self.actor, ca, d_head)
        nnet.adam_step(self.actor, g_actor, self.actor_opt)

        alpha_grad = np.array([-float(np.mean(logp + cfg.entropy_target))])
        nnet.adam_step(self.log_alpha, alpha_grad, self.alpha_opt)

        polyak_update(self.critic1_t, self.critic1, cfg.tau)
        polyak_update(self.critic2_t, self.critic2, cfg.tau)
        return {"critic_loss": critic_loss / 2.0, "actor_loss": actor_loss, "alpha": alpha}


def train_sac(env_cfg: EnvConfig, algo_cfg: AlgoConfig, seed, total_steps: int,
              eval_every: int = 5000, stop_when_stable: bool = True,
              eval_seeds=(1, 2, 3), reward_scale=None) -> TrainResult:
    """Returns the greedy (mean-action) actor; same stop rule as the DDPG loop.

    reward_scale rescales rewards inside the updates only; the boundary
    penalty is large, and shrinking it keeps the entropy term competitive so
    the policy settles on the noise-robust hold at the balance point instead
    of a wide orbit.
    """
    if total_steps < algo_cfg.batch:
        raise ValueError("total_steps must be at least one batch")
    rng_seed, core_seed = spawn_seeds(seed, 2)
    rng = np.random.default_rng(rng_seed)
    core = SacCore(algo_cfg, core_seed, reward_scale=reward_scale)
    replay = ReplayBuffer(algo_cfg.buffer_capacity)

    result = TrainResult(core.actor_spec, core.actor, 0)
    state = env_reset(env_cfg, rng)
    ep_return = 0.0
    last = {"critic_loss": float("nan"), "actor_loss": float("nan")}

    for step in range(1, total_steps + 1):
        obs = obs_of(state.theta, state.omega)
        if step <= algo_cfg.warmup_steps:
            action = rng.uniform(-1.0, 1.0)
        else:
            action = core.explore_action(state.theta, state.omega, rng)
        nxt, r, done = env_step(state, action, env_cfg)
        crashed = abs(nxt.theta) >= env_cfg.physics.crash_bound
        replay.add(obs, action, r, obs_of(nxt.theta, nxt.omega), crashed, done)
        record_transition(result.transitions, state, action, r, nxt, done)
        ep_return += r

        if done:
            result.log.append({"step": step, "episode_return": ep_return,
                               "critic_loss": last["critic_loss"],
                               "actor_loss": last["actor_loss"]})
            ep_return = 0.0
            state = env_reset(env_cfg, rng)
        else:
            state = nxt

        if step > algo_cfg.warmup_steps:
            last = core.update(replay.sample(rng, algo_cfg.batch), rng)

        if eval_every and step % eval_every == 0 and step > algo_cfg.warmup_steps:
            report = evaluate_policy(sac_mean_act_fn(core.actor_spec, core.actor),
                                     env_cfg, eval_seeds)
            result.eval_history.append({"step": step, "crashes": report.crashes,
                                        "mean_abs_theta": report.mean_abs_theta,
                                        "alpha": core.alpha})
            if (stop_when_stable and report.crashes <= STABLE_CRASHES
                    and report.mean_abs_theta < STABLE_MEAN_ABS_THETA):
                result.steps = step
                break
    else:
        result.steps = total_steps

    result.extras = {"core": core}
    return result
