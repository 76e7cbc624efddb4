"""Suggestion gating and the human-in-the-loop improvement path.

The gate decides when the assistant is allowed to speak; suggestions wrap a
policy evaluation with the issue time; disagreement episodes are the samples
where agent and human pushed in opposite directions, and fine-tuning moves
the assistant toward the human on exactly those.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import nnet
from .rl import AlgoConfig, EnvConfig
from .rl.bc import train_bc
from .windows import ObservationWindow, WindowConfig

DEAD_BAND = 0.01
ASSISTANT_KINDS = ("ddpg", "sac", "airl", "dl")


@dataclass(frozen=True)
class GatingPolicy:
    prob_threshold: float = 0.8
    inner_angle: float = 12.0
    outer_angle: float = 15.0

    def __post_init__(self):
        if not 0.0 <= self.prob_threshold <= 1.0:
            raise ValueError("prob_threshold must lie in [0, 1]")
        if not 0.0 < self.inner_angle < self.outer_angle:
            raise ValueError("need 0 < inner_angle < outer_angle")


def gate(crash_prob: float, theta: float, policy: GatingPolicy = GatingPolicy()) -> bool:
    """True when a suggestion may be issued at this sample."""
    risky = crash_prob > policy.prob_threshold and abs(theta) > policy.inner_angle
    return risky or abs(theta) > policy.outer_angle


def deflection_direction(deflection: float) -> int:
    """-1/0/+1 with the dead-band counting as no deflection."""
    if abs(deflection) <= DEAD_BAND:
        return 0
    return 1 if deflection > 0 else -1


@dataclass(frozen=True)
class Suggestion:
    t_issued: float
    deflection: float

    def __post_init__(self):
        if not (math.isfinite(self.deflection) and abs(self.deflection) <= 1.0):
            raise ValueError("suggested deflection must be finite and within [-1, 1]")

    @property
    def direction(self) -> int:
        return deflection_direction(self.deflection)


def _policy_output(assistant_policy, window: ObservationWindow) -> float:
    if hasattr(assistant_policy, "act"):
        return float(assistant_policy.act(window))
    return float(assistant_policy(window))


def suggest(assistant_policy, window: ObservationWindow, t_now: float) -> Suggestion:
    """Evaluate the policy on the current window; pure given (policy, window)."""
    return Suggestion(t_issued=t_now, deflection=_policy_output(assistant_policy, window))


@dataclass(frozen=True)
class DisagreementEpisode:
    window: ObservationWindow
    agent_deflection: float
    human_deflection: float

    def __post_init__(self):
        a = deflection_direction(self.agent_deflection)
        h = deflection_direction(self.human_deflection)
        if a == 0 or h == 0 or a == h:
            raise ValueError("a disagreement needs two opposite nonzero deflections")


def extract_disagreements(samples) -> list:
    """Samples are (window, agent_deflection, human_deflection) triples from a
    phase where both streams ran concurrently. Rows where either value is
    None/NaN are skipped; a log where one whole stream is absent raises.
    Order-preserving, idempotent."""
    episodes = []
    saw_agent = saw_human = False
    n = 0
    for window, agent_d, human_d in samples:
        n += 1
        a_ok = agent_d is not None and math.isfinite(agent_d)
        h_ok = human_d is not None and math.isfinite(human_d)
        saw_agent |= a_ok
        saw_human |= h_ok
        if not (a_ok and h_ok):
            continue
        da, dh = deflection_direction(agent_d), deflection_direction(human_d)
        if da != 0 and dh != 0 and da != dh:
            episodes.append(DisagreementEpisode(window, float(agent_d), float(human_d)))
    if n and not saw_agent:
        raise ValueError("log is missing the agent deflection stream")
    if n and not saw_human:
        raise ValueError("log is missing the human deflection stream")
    return episodes


@dataclass(frozen=True)
class Assistant:
    """A suggestion-producing policy plus what finetune() needs to know."""

    kind: str
    spec: nnet.NetworkSpec
    params: nnet.Parameters
    window_config: WindowConfig
    algo_cfg: AlgoConfig = None
    env_cfg: EnvConfig = None

    def __post_init__(self):
        if self.kind not in ASSISTANT_KINDS:
            raise ValueError(f"unknown assistant kind {self.kind!r}")

    def policy_value(self, window: ObservationWindow) -> float:
        has_lane = window.deflections is not None
        if has_lane != self.window_config.include_deflections:
            raise ValueError("window deflection lane does not match this assistant's input")
        feats = window.features()
        if self.spec.arch == "mlp":
            feats = feats.ravel()[None, :]
        out = nnet.forward(self.spec, self.params, feats)
        if self.kind == "sac":
            return float(np.tanh(out[0]))  # mean of the squashed policy
        return float(np.clip(out[0], -1.0, 1.0))

    def act(self, window: ObservationWindow) -> float:
        return self.policy_value(window)


def save_episodes(episodes, path) -> None:
    """One episode per JSONL line; floats survive the round trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps({
                "thetas": list(ep.window.thetas),
                "omegas": list(ep.window.omegas),
                "deflections": None if ep.window.deflections is None
                else list(ep.window.deflections),
                "agent_deflection": ep.agent_deflection,
                "human_deflection": ep.human_deflection,
            }) + "\n")


def load_episodes(path) -> list:
    episodes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            window = ObservationWindow(doc["thetas"], doc["omegas"], doc["deflections"])
            episodes.append(DisagreementEpisode(window, doc["agent_deflection"],
                                                doc["human_deflection"]))
    return episodes


def _episode_features(assistant: Assistant, ep: DisagreementEpisode) -> np.ndarray:
    feats = ep.window.features()
    if assistant.spec.arch == "mlp":
        return feats.ravel()[None, :]
    return feats


def _finetune_sac_mean(assistant: Assistant, episodes, seed, lr, epochs) -> nnet.Parameters:
    # regress tanh(mu) onto the human action; the log-std head is left alone
    params = assistant.params.copy()
    opt = nnet.AdamState.for_params(params, lr=lr)
    xs = np.stack([_episode_features(assistant, ep) for ep in episodes])
    ys = np.asarray([[ep.human_deflection] for ep in episodes])
    n = xs.shape[0]
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, 256):
            idx = order[lo : lo + 256]
            head, cache = nnet.forward_batch(assistant.spec, params, xs[idx], want_cache=True)
            a = np.tanh(head[:, 0:1])
            d_mu = 2.0 * (a - ys[idx]) / idx.size * (1.0 - a * a)
            d_head = np.concatenate([d_mu, np.zeros_like(d_mu)], axis=1)
            grads, _ = nnet.backward_batch(assistant.spec, params, cache, d_head)
            nnet.adam_step(params, grads, opt)
    return params


def finetune(assistant: Assistant, episodes, seed, lr: float = 1e-4,
             epochs: int = 20, airl_steps: int = 4000) -> Assistant:
    """Move the assistant toward the human on the disagreement set.

    ddpg/dl: behavior cloning with the human deflection as target.
    sac: same target through the squashed mean.
    airl: one adversarial phase with (state, human action) as expert pairs.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("no disagreement episodes to fine-tune on")

    if assistant.kind in ("ddpg", "dl"):
        demos = [(ep.window, ep.human_deflection) for ep in episodes]
        params = train_bc(assistant.spec, demos, seed, epochs=epochs, lr=lr,
                          init_params=assistant.params)
    elif assistant.kind == "sac":
        params = _finetune_sac_mean(assistant, episodes, seed, lr, epochs)
    else:
        from .rl.airl import train_airl

        demos = np.asarray([(ep.window.thetas[-1], ep.window.omegas[-1], ep.human_deflection)
                            for ep in episodes])
        algo = dataclasses.replace(assistant.algo_cfg or AlgoConfig(algo="AIRL"), lr=lr)
        env = assistant.env_cfg or EnvConfig()
        result = train_airl(env, algo, demos, seed, iterations=1,
                            steps_per_iteration=airl_steps, init_actor=assistant.params)
        params = result.actor
    return dataclasses.replace(assistant, params=params)
