"""Adam with bias correction, operating on flat parameter vectors in place."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Parameters


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params: Parameters, lr: float = 3e-4, **kw) -> "AdamState":
        n = len(params)
        return cls(lr=lr, m=np.zeros(n), v=np.zeros(n), **kw)


def adam_step(params: Parameters, grads: np.ndarray, state: AdamState) -> None:
    """One update; mutates params.data and state."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.data.shape:
        raise ValueError("gradient and parameter vectors differ in length")
    if state.m is None or state.v is None:
        state.m = np.zeros_like(params.data)
        state.v = np.zeros_like(params.data)
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
