"""Fixed-capacity FIFO replay storage over flat numpy arrays."""
from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring buffer of (state, action, reward, next_state, crash, done) rows.

    `crash` marks a true terminal for bootstrapping; `done` additionally
    covers episode timeouts, which end collection but should not cut the
    value estimate short.
    """

    def __init__(self, capacity: int, obs_dim: int = 2):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, 1))
        self.rew = np.zeros(capacity)
        self.nxt = np.zeros((capacity, obs_dim))
        self.crash = np.zeros(capacity)
        self.done = np.zeros(capacity)
        self._write = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward, next_obs, crash, done) -> None:
        i = self._write
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.nxt[i] = next_obs
        self.crash[i] = float(crash)
        self.done[i] = float(done)
        self._write = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng, batch: int) -> dict:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch)
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "rew": self.rew[idx],
            "nxt": self.nxt[idx],
            "crash": self.crash[idx],
            "done": self.done[idx],
        }
