"""Behavior cloning: supervised regression of actions on observation windows."""
from __future__ import annotations

import numpy as np

from .. import nnet
from ..windows import ObservationWindow


def _demo_features(spec: nnet.NetworkSpec, window) -> np.ndarray:
    feats = window.features() if isinstance(window, ObservationWindow) else np.asarray(window, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats[None, :]
    if spec.arch == "mlp":
        flat = feats.ravel()
        if flat.size != spec.input_dim:
            raise ValueError(f"demonstration size {flat.size} != input_dim {spec.input_dim}")
        return flat[None, :]
    if feats.shape[1] != spec.input_dim:
        raise ValueError(f"demonstration feature size {feats.shape[1]} != input_dim {spec.input_dim}")
    return feats


def train_bc(spec: nnet.NetworkSpec, demonstrations, seed, epochs: int,
             lr: float = 3e-4, batch: int = 256, init_params: nnet.Parameters = None):
    """MSE regression; returns trained Parameters.

    Starts from a seeded initialization (or a copy of init_params when
    continuing from existing weights). Zero epochs returns the start
    weights untouched.
    """
    if not demonstrations:
        raise ValueError("empty demonstrations")
    rng_seed, init_seed = (seed if isinstance(seed, np.random.SeedSequence)
                           else np.random.SeedSequence(seed)).spawn(2)
    rng = np.random.default_rng(rng_seed)
    params = init_params.copy() if init_params is not None else nnet.init(spec, init_seed)
    if epochs == 0:
        return params

    xs = np.stack([_demo_features(spec, w) for w, _ in demonstrations])
    ys = np.asarray([[float(a)] for _, a in demonstrations])
    n = xs.shape[0]
    opt = nnet.AdamState.for_params(params, lr=lr)
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo : lo + batch]
            x = xs[idx]
            y, cache = nnet.forward_batch(spec, params, x, want_cache=True)
            d_post = 2.0 * (y - ys[idx]) / idx.size
            grads, _ = nnet.backward_batch(spec, params, cache, nnet.head_pre_grad(spec, cache, d_post))
            nnet.adam_step(params, grads, opt)
    return params
