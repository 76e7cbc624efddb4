"""Forward passes, exact backpropagation (through time), and batch losses.

Hidden activations are tanh throughout; recurrent state starts at zero for
every sequence. Batched inputs are (batch, time, features); an MLP insists
on time length 1. Gradients are computed analytically, layer by layer in
reverse, against the same caches the forward pass produced.
"""
from __future__ import annotations

import numpy as np

from .core import NetworkSpec, Parameters

__all__ = [
    "forward",
    "forward_batch",
    "backward_batch",
    "gradients",
    "gru_cell",
    "Runner",
]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so neither branch exponentiates a large positive value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return _sigmoid(z)
    return z


# ---------------------------------------------------------------------------
# forward

def forward(spec: NetworkSpec, params: Parameters, sequence) -> np.ndarray:
    """Run one input sequence (time, features) and return the output vector."""
    x = np.atleast_2d(np.asarray(sequence, dtype=np.float64))
    y, _ = forward_batch(spec, params, x[None], want_cache=False)
    return y[0]


def forward_batch(spec: NetworkSpec, params: Parameters, x, want_cache: bool = False):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("expected input of shape (batch, time, features)")
    _, t_len, d = x.shape
    if d != spec.input_dim:
        raise ValueError(f"input feature size {d} != network input_dim {spec.input_dim}")
    if spec.arch == "mlp":
        if t_len != 1:
            raise ValueError("mlp networks consume a single feature vector, not a sequence")
        return _forward_mlp(spec, params, x, want_cache)
    return _forward_recurrent(spec, params, x, want_cache)


def _forward_mlp(spec, params, x, want_cache):
    a = x[:, 0, :]
    acts = [a]
    n_hidden = len(spec.hidden_dims)
    for i in range(n_hidden):
        a = np.tanh(a @ params[f"W{i}"].T + params[f"b{i}"])
        acts.append(a)
    head_pre = a @ params[f"W{n_hidden}"].T + params[f"b{n_hidden}"]
    y = _activate(head_pre, spec.output_activation)
    cache = {"acts": acts, "head_pre": head_pre, "y": y} if want_cache else None
    return y, cache


def _forward_recurrent(spec, params, x, want_cache):
    layer_fn = {"rnn": _rnn_layer, "gru": _gru_layer, "lstm": _lstm_layer}[spec.arch]
    inp = x
    layers = []
    for layer, h in enumerate(spec.hidden_dims):
        inp, lc = layer_fn(params, layer, inp, h, want_cache)
        layers.append(lc)
    head_pre = inp[:, -1, :] @ params["Wy"].T + params["by"]
    y = _activate(head_pre, spec.output_activation)
    cache = {"x": x, "layers": layers, "head_pre": head_pre, "y": y} if want_cache else None
    return y, cache


def _rnn_layer(params, layer, xin, h, want_cache):
    b, t_len, _ = xin.shape
    wx, uh, bh = params[f"Wx{layer}"], params[f"Uh{layer}"], params[f"bh{layer}"]
    xh = (xin.reshape(b * t_len, -1) @ wx.T).reshape(b, t_len, h)
    out = np.empty((b, t_len, h))
    hprev = np.zeros((b, h))
    for t in range(t_len):
        hprev = np.tanh(xh[:, t] + hprev @ uh.T + bh)
        out[:, t] = hprev
    cache = {"X": xin, "H": out} if want_cache else None
    return out, cache


def gru_cell(params: Parameters, layer: int, x_t, h_prev):
    """One GRU step: update/reset gates, candidate, convex blend of old state."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=np.float64))
    h = h_prev.shape[1]
    zr = _sigmoid(x_t @ params[f"Wzr{layer}"].T + h_prev @ params[f"Uzr{layer}"].T + params[f"bzr{layer}"])
    z, r = zr[:, :h], zr[:, h:]
    cand = np.tanh(x_t @ params[f"Wc{layer}"].T + (r * h_prev) @ params[f"Uc{layer}"].T + params[f"bc{layer}"])
    return (1.0 - z) * h_prev + z * cand


def _gru_layer(params, layer, xin, h, want_cache):
    b, t_len, _ = xin.shape
    wzr, uzr, bzr = params[f"Wzr{layer}"], params[f"Uzr{layer}"], params[f"bzr{layer}"]
    wc, uc, bc = params[f"Wc{layer}"], params[f"Uc{layer}"], params[f"bc{layer}"]
    flat = xin.reshape(b * t_len, -1)
    xzr = (flat @ wzr.T).reshape(b, t_len, 2 * h)
    xc = (flat @ wc.T).reshape(b, t_len, h)
    out = np.empty((b, t_len, h))
    if want_cache:
        zs = np.empty((b, t_len, h))
        rs = np.empty((b, t_len, h))
        cands = np.empty((b, t_len, h))
    hprev = np.zeros((b, h))
    for t in range(t_len):
        zr = _sigmoid(xzr[:, t] + hprev @ uzr.T + bzr)
        z, r = zr[:, :h], zr[:, h:]
        cand = np.tanh(xc[:, t] + (r * hprev) @ uc.T + bc)
        hprev = (1.0 - z) * hprev + z * cand
        out[:, t] = hprev
        if want_cache:
            zs[:, t] = z
            rs[:, t] = r
            cands[:, t] = cand
    cache = {"X": xin, "H": out, "Z": zs, "R": rs, "C": cands} if want_cache else None
    return out, cache


def _lstm_layer(params, layer, xin, h, want_cache):
    b, t_len, _ = xin.shape
    wg, ug, bg = params[f"Wg{layer}"], params[f"Ug{layer}"], params[f"bg{layer}"]
    xg = (xin.reshape(b * t_len, -1) @ wg.T).reshape(b, t_len, 4 * h)
    out = np.empty((b, t_len, h))
    if want_cache:
        gates = np.empty((b, t_len, 4 * h))
        cells = np.empty((b, t_len, h))
    hprev = np.zeros((b, h))
    cprev = np.zeros((b, h))
    for t in range(t_len):
        pre = xg[:, t] + hprev @ ug.T + bg
        iog = _sigmoid(pre[:, : 3 * h])
        i, f, o = iog[:, :h], iog[:, h : 2 * h], iog[:, 2 * h :]
        g = np.tanh(pre[:, 3 * h :])
        cprev = f * cprev + i * g
        hprev = o * np.tanh(cprev)
        out[:, t] = hprev
        if want_cache:
            gates[:, t, : 3 * h] = iog
            gates[:, t, 3 * h :] = g
            cells[:, t] = cprev
    cache = {"X": xin, "H": out, "G": gates, "CELL": cells} if want_cache else None
    return out, cache


# ---------------------------------------------------------------------------
# backward

def backward_batch(spec: NetworkSpec, params: Parameters, cache: dict, d_head_pre):
    """Gradients of a scalar loss given d(loss)/d(head pre-activation).

    Returns (flat gradient vector aligned with params.data, gradient w.r.t.
    the batched input).
    """
    grads = np.zeros_like(params.data)
    gp = Parameters(grads, params.table)
    d_head_pre = np.asarray(d_head_pre, dtype=np.float64)
    if spec.arch == "mlp":
        dx = _backward_mlp(spec, params, cache, d_head_pre, gp)
        return grads, dx[:, None, :]
    return grads, _backward_recurrent(spec, params, cache, d_head_pre, gp)


def head_pre_grad(spec: NetworkSpec, cache: dict, d_post):
    """Convert d(loss)/d(output) into d(loss)/d(head pre-activation)."""
    act = spec.output_activation
    if act == "linear":
        return d_post
    y = cache["y"]
    if act == "tanh":
        return d_post * (1.0 - y * y)
    return d_post * y * (1.0 - y)


def _backward_mlp(spec, params, cache, d, gp):
    acts = cache["acts"]
    for i in range(len(spec.hidden_dims), -1, -1):
        gp[f"W{i}"] += d.T @ acts[i]
        gp[f"b{i}"] += d.sum(axis=0)
        d_in = d @ params[f"W{i}"]
        if i == 0:
            return d_in
        d = d_in * (1.0 - acts[i] * acts[i])
    return d_in


def _backward_recurrent(spec, params, cache, d_head, gp):
    layers = cache["layers"]
    top = layers[-1]["H"]
    gp["Wy"] += d_head.T @ top[:, -1]
    gp["by"] += d_head.sum(axis=0)
    d_out = np.zeros_like(top)
    d_out[:, -1] = d_head @ params["Wy"]
    layer_fn = {"rnn": _backward_rnn_layer, "gru": _backward_gru_layer, "lstm": _backward_lstm_layer}[spec.arch]
    for layer in range(len(layers) - 1, -1, -1):
        d_out = layer_fn(params, layer, layers[layer], d_out, gp)
    return d_out


def _hidden_before(H, t, b, h):
    return H[:, t - 1] if t > 0 else np.zeros((b, h))


def _backward_rnn_layer(params, layer, lc, d_out, gp):
    X, H = lc["X"], lc["H"]
    b, t_len, h = H.shape
    wx, uh = params[f"Wx{layer}"], params[f"Uh{layer}"]
    g_wx, g_uh, g_bh = gp[f"Wx{layer}"], gp[f"Uh{layer}"], gp[f"bh{layer}"]
    dX = np.empty_like(X)
    dh_next = np.zeros((b, h))
    for t in range(t_len - 1, -1, -1):
        hprev = _hidden_before(H, t, b, h)
        da = (d_out[:, t] + dh_next) * (1.0 - H[:, t] * H[:, t])
        g_wx += da.T @ X[:, t]
        g_uh += da.T @ hprev
        g_bh += da.sum(axis=0)
        dh_next = da @ uh
        dX[:, t] = da @ wx
    return dX


def _backward_gru_layer(params, layer, lc, d_out, gp):
    X, H, Z, R, C = lc["X"], lc["H"], lc["Z"], lc["R"], lc["C"]
    b, t_len, h = H.shape
    wzr, uzr = params[f"Wzr{layer}"], params[f"Uzr{layer}"]
    wc, uc = params[f"Wc{layer}"], params[f"Uc{layer}"]
    g_wzr, g_uzr, g_bzr = gp[f"Wzr{layer}"], gp[f"Uzr{layer}"], gp[f"bzr{layer}"]
    g_wc, g_uc, g_bc = gp[f"Wc{layer}"], gp[f"Uc{layer}"], gp[f"bc{layer}"]
    dX = np.empty_like(X)
    dh_next = np.zeros((b, h))
    for t in range(t_len - 1, -1, -1):
        z, r, cand = Z[:, t], R[:, t], C[:, t]
        hprev = _hidden_before(H, t, b, h)
        dh = d_out[:, t] + dh_next
        dz = dh * (cand - hprev)
        d_cand = dh * z
        dh_prev = dh * (1.0 - z)
        d_ac = d_cand * (1.0 - cand * cand)
        g_wc += d_ac.T @ X[:, t]
        g_uc += d_ac.T @ (r * hprev)
        g_bc += d_ac.sum(axis=0)
        d_rh = d_ac @ uc
        dr = d_rh * hprev
        dh_prev += d_rh * r
        d_azr = np.concatenate([dz * z * (1.0 - z), dr * r * (1.0 - r)], axis=1)
        g_wzr += d_azr.T @ X[:, t]
        g_uzr += d_azr.T @ hprev
        g_bzr += d_azr.sum(axis=0)
        dh_prev += d_azr @ uzr
        dX[:, t] = d_azr @ wzr + d_ac @ wc
        dh_next = dh_prev
    return dX


def _backward_lstm_layer(params, layer, lc, d_out, gp):
    X, H, G, CELL = lc["X"], lc["H"], lc["G"], lc["CELL"]
    b, t_len, h = H.shape
    wg, ug = params[f"Wg{layer}"], params[f"Ug{layer}"]
    g_wg, g_ug, g_bg = gp[f"Wg{layer}"], gp[f"Ug{layer}"], gp[f"bg{layer}"]
    dX = np.empty_like(X)
    dh_next = np.zeros((b, h))
    dc_next = np.zeros((b, h))
    da = np.empty((b, 4 * h))
    for t in range(t_len - 1, -1, -1):
        i, f, o = G[:, t, :h], G[:, t, h : 2 * h], G[:, t, 2 * h : 3 * h]
        g = G[:, t, 3 * h :]
        c = CELL[:, t]
        cprev = _hidden_before(CELL, t, b, h)
        hprev = _hidden_before(H, t, b, h)
        tc = np.tanh(c)
        dh = d_out[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da[:, :h] = (dc * g) * i * (1.0 - i)
        da[:, h : 2 * h] = (dc * cprev) * f * (1.0 - f)
        da[:, 2 * h : 3 * h] = (dh * tc) * o * (1.0 - o)
        da[:, 3 * h :] = (dc * i) * (1.0 - g * g)
        g_wg += da.T @ X[:, t]
        g_ug += da.T @ hprev
        g_bg += da.sum(axis=0)
        dh_next = da @ ug
        dc_next = dc * f
        dX[:, t] = da @ wg
    return dX


# ---------------------------------------------------------------------------
# batch losses

LOSSES = ("mse", "bce")


def gradients(spec: NetworkSpec, params: Parameters, batch, loss: str = "mse"):
    """Mean loss over a batch of (sequence, target) pairs, plus its gradient.

    MSE sums squared error over output components before averaging across the
    batch. BCE requires a sigmoid head and is evaluated on the pre-activation
    for stability. A non-finite per-sample loss raises, naming the sample.
    """
    loss = loss.lower()
    if loss not in LOSSES:
        raise ValueError(f"unsupported loss {loss!r}")
    if not batch:
        raise ValueError("empty batch")
    xs = [np.atleast_2d(np.asarray(seq, dtype=np.float64)) for seq, _ in batch]
    t_len = xs[0].shape[0]
    if any(s.shape != xs[0].shape for s in xs):
        raise ValueError("all sequences in a batch must share one shape")
    x = np.stack(xs)
    targets = np.asarray([np.ravel(np.asarray(t, dtype=np.float64)) for _, t in batch])
    if targets.shape[1] != spec.output_dim:
        raise ValueError(f"target size {targets.shape[1]} != output_dim {spec.output_dim}")
    n = len(batch)
    y, cache = forward_batch(spec, params, x, want_cache=True)
    if loss == "mse":
        with np.errstate(over="ignore"):
            per = ((y - targets) ** 2).sum(axis=1)
        _require_finite(per)
        d_pre = head_pre_grad(spec, cache, 2.0 * (y - targets) / n)
    else:
        if spec.output_activation != "sigmoid":
            raise ValueError("bce loss requires a sigmoid output head")
        z = cache["head_pre"]
        per = (np.logaddexp(0.0, z) - targets * z).sum(axis=1)
        _require_finite(per)
        d_pre = (y - targets) / n
    grads, _ = backward_batch(spec, params, cache, d_pre)
    return float(per.mean()), grads


def _require_finite(per_sample: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(per_sample))
    if bad.size:
        raise ValueError(f"non-finite loss at sample {int(bad[0])}")


# ---------------------------------------------------------------------------
# hot-loop inference

class Runner:
    """Single-sequence inference with weights pre-transposed once.

    The control loop evaluates networks thousands of times per trial; this
    avoids re-slicing the flat vector and re-materializing transposes on
    every call. Numerics match forward()'s per-step ordering.
    """

    def __init__(self, spec: NetworkSpec, params: Parameters):
        self.spec = spec
        c = np.ascontiguousarray
        self._layers = []
        if spec.arch == "mlp":
            n_hidden = len(spec.hidden_dims)
            for i in range(n_hidden + 1):
                self._layers.append((c(params[f"W{i}"].T), params[f"b{i}"].ravel().copy()))
        else:
            for layer, h in enumerate(spec.hidden_dims):
                if spec.arch == "rnn":
                    mats = (c(params[f"Wx{layer}"].T), c(params[f"Uh{layer}"].T),
                            params[f"bh{layer}"].ravel().copy())
                elif spec.arch == "gru":
                    mats = (c(params[f"Wzr{layer}"].T), c(params[f"Uzr{layer}"].T),
                            params[f"bzr{layer}"].ravel().copy(),
                            c(params[f"Wc{layer}"].T), c(params[f"Uc{layer}"].T),
                            params[f"bc{layer}"].ravel().copy())
                else:
                    mats = (c(params[f"Wg{layer}"].T), c(params[f"Ug{layer}"].T),
                            params[f"bg{layer}"].ravel().copy())
                self._layers.append((h, mats))
            self._head = (c(params["Wy"].T), params["by"].ravel().copy())

    def __call__(self, sequence) -> np.ndarray:
        x = np.atleast_2d(np.asarray(sequence, dtype=np.float64))
        if self.spec.arch == "mlp":
            a = x[0] if x.shape[0] == 1 else x.ravel()
            for wt, bias in self._layers[:-1]:
                a = np.tanh(a @ wt + bias)
            wt, bias = self._layers[-1]
            return _activate(a @ wt + bias, self.spec.output_activation)
        out = x
        for h, mats in self._layers:
            out = self._run_layer(h, mats, out)
        wt, bias = self._head
        return _activate(out[-1] @ wt + bias, self.spec.output_activation)

    def _run_layer(self, h, mats, xin):
        t_len = xin.shape[0]
        arch = self.spec.arch
        hid = np.zeros(h)
        out = np.empty((t_len, h))
        if arch == "rnn":
            wxt, uht, bh = mats
            xh = xin @ wxt
            for t in range(t_len):
                hid = np.tanh(xh[t] + hid @ uht + bh)
                out[t] = hid
        elif arch == "gru":
            wzrt, uzrt, bzr, wct, uct, bc = mats
            xzr = xin @ wzrt
            xc = xin @ wct
            for t in range(t_len):
                zr = _sigmoid(xzr[t] + hid @ uzrt + bzr)
                z, r = zr[:h], zr[h:]
                cand = np.tanh(xc[t] + (r * hid) @ uct + bc)
                hid = (1.0 - z) * hid + z * cand
                out[t] = hid
        else:
            wgt, ugt, bg = mats
            xg = xin @ wgt
            cell = np.zeros(h)
            for t in range(t_len):
                pre = xg[t] + hid @ ugt + bg
                iog = _sigmoid(pre[: 3 * h])
                g = np.tanh(pre[3 * h :])
                cell = iog[h : 2 * h] * cell + iog[:h] * g
                hid = iog[2 * h : 3 * h] * np.tanh(cell)
                out[t] = hid
        return out
