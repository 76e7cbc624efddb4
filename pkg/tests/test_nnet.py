import json
import math

import numpy as np
import pytest

from vipassist import nnet


def fd_gradient(spec, params, batch, loss, h=1e-5):
    """Central-difference gradient of the batch loss, one coordinate at a time."""
    grad = np.zeros_like(params.data)
    for i in range(len(params)):
        orig = params.data[i]
        params.data[i] = orig + h
        up, _ = nnet.gradients(spec, params, batch, loss)
        params.data[i] = orig - h
        down, _ = nnet.gradients(spec, params, batch, loss)
        params.data[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad


def make_batch(rng, spec, t_len, n, binary=False):
    batch = []
    for _ in range(n):
        seq = rng.uniform(-1.0, 1.0, size=(t_len, spec.input_dim))
        if binary:
            target = rng.integers(0, 2, size=spec.output_dim).astype(float)
        else:
            target = rng.uniform(-0.8, 0.8, size=spec.output_dim)
        batch.append((seq, target))
    return batch


GRADCHECK_CASES = [
    ("mlp", (4,), "tanh", "mse", 1),
    ("mlp", (5, 4), "linear", "mse", 1),
    ("mlp", (4,), "sigmoid", "bce", 1),
    ("rnn", (4,), "tanh", "mse", 5),
    ("gru", (4,), "tanh", "mse", 5),
    ("gru", (4, 3), "sigmoid", "bce", 6),
    ("lstm", (4,), "tanh", "mse", 5),
    ("lstm", (3, 3), "linear", "mse", 4),
]


@pytest.mark.parametrize("arch,hidden,head,loss,t_len", GRADCHECK_CASES)
def test_gradients_match_finite_differences(arch, hidden, head, loss, t_len):
    spec = nnet.NetworkSpec(arch, 3, hidden, 2 if head == "linear" else 1, head)
    params = nnet.init(spec, seed=7)
    rng = np.random.default_rng(11)
    batch = make_batch(rng, spec, t_len, 3, binary=(loss == "bce"))
    _, analytic = nnet.gradients(spec, params, batch, loss)
    numeric = fd_gradient(spec, params, batch, loss)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-10)
    rel = np.abs(analytic - numeric) / denom
    # absolute agreement counts for coordinates whose gradient is ~0
    ok = (rel < 1e-4) | (np.abs(analytic - numeric) < 1e-8)
    assert ok.all(), f"worst rel err {rel.max():.3e}"


def test_gradient_check_suite_is_fast():
    import time

    start = time.monotonic()
    spec = nnet.NetworkSpec("gru", 3, (4,), 1, "tanh")
    params = nnet.init(spec, seed=3)
    batch = make_batch(np.random.default_rng(5), spec, 5, 2)
    fd_gradient(spec, params, batch, "mse")
    assert time.monotonic() - start < 60.0


def test_param_count_tiny_mlp():
    spec = nnet.NetworkSpec("mlp", 2, (), 1, "linear")
    assert len(nnet.init(spec, seed=0)) == 3


def test_affine_forward_by_hand():
    spec = nnet.NetworkSpec("mlp", 2, (), 1, "linear")
    params = nnet.Parameters(np.array([2.0, 0.0, 1.0]), nnet.shape_table(spec))
    y = nnet.forward(spec, params, [[3.0, 5.0]])
    assert y.shape == (1,)
    assert y[0] == pytest.approx(7.0, abs=0.0)


def test_zero_weight_tanh_net_outputs_zero():
    spec = nnet.NetworkSpec("mlp", 3, (4, 4), 2, "tanh")
    params = nnet.zeros_like(nnet.init(spec, seed=0))
    assert np.all(nnet.forward(spec, params, [[0.3, -0.2, 0.9]]) == 0.0)


def test_gru_cell_zero_weights_halves_state():
    spec = nnet.NetworkSpec("gru", 2, (3,), 1, "tanh")
    params = nnet.zeros_like(nnet.init(spec, seed=0))
    h = nnet.gru_cell(params, 0, np.ones(2), np.ones(3))
    # update gate 0.5, candidate 0 -> next state is half the carried-in state
    assert np.allclose(h, 0.5)


def test_single_weight_gradient_by_hand():
    # y = w*x + b, one sample (x=2, target=0), w=1, b=0: loss=(2)^2, dL/dw = 2*y*x = 8
    spec = nnet.NetworkSpec("mlp", 1, (), 1, "linear")
    params = nnet.Parameters(np.array([1.0, 0.0]), nnet.shape_table(spec))
    loss, grads = nnet.gradients(spec, params, [([[2.0]], [0.0])], "mse")
    assert loss == pytest.approx(4.0)
    assert grads[0] == pytest.approx(8.0)
    assert grads[1] == pytest.approx(4.0)


def test_forward_batch_matches_single(tmp_path):
    spec = nnet.NetworkSpec("lstm", 3, (5,), 2, "tanh")
    params = nnet.init(spec, seed=21)
    rng = np.random.default_rng(2)
    seqs = rng.uniform(-1, 1, size=(4, 6, 3))
    batched, _ = nnet.forward_batch(spec, params, seqs)
    for i in range(4):
        single = nnet.forward(spec, params, seqs[i])
        assert np.allclose(batched[i], single, rtol=0, atol=1e-12)


@pytest.mark.parametrize("arch,hidden", [("mlp", (6,)), ("rnn", (5,)), ("gru", (4, 4)), ("lstm", (5,))])
def test_runner_matches_forward(arch, hidden):
    spec = nnet.NetworkSpec(arch, 3, hidden, 2, "tanh")
    params = nnet.init(spec, seed=13)
    run = nnet.Runner(spec, params)
    rng = np.random.default_rng(4)
    t_len = 1 if arch == "mlp" else 7
    for _ in range(5):
        seq = rng.uniform(-1, 1, size=(t_len, 3))
        assert np.allclose(run(seq), nnet.forward(spec, params, seq), rtol=1e-12, atol=1e-12)


def test_runner_flattens_windows_for_mlp():
    spec = nnet.NetworkSpec("mlp", 6, (4,), 1, "tanh")
    params = nnet.init(spec, seed=9)
    window = np.arange(6.0).reshape(3, 2)
    run = nnet.Runner(spec, params)
    assert np.allclose(run(window), nnet.forward(spec, params, [window.ravel()]))


def test_init_seeded_and_biases_zero():
    spec = nnet.NetworkSpec("gru", 3, (8,), 1, "tanh")
    a = nnet.init(spec, seed=42)
    b = nnet.init(spec, seed=42)
    c = nnet.init(spec, seed=43)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)
    for name in ("bzr0", "bc0", "by"):
        assert np.all(a[name] == 0.0)
    w = a["Wzr0"]
    lim = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
    assert np.abs(w).max() <= lim


def test_spec_validation():
    with pytest.raises(ValueError):
        nnet.NetworkSpec("transformer", 3, (4,), 1)
    with pytest.raises(ValueError):
        nnet.NetworkSpec("mlp", 3, (4,), 1, "relu")
    with pytest.raises(ValueError):
        nnet.NetworkSpec("gru", 3, (), 1)
    with pytest.raises(ValueError):
        nnet.NetworkSpec("mlp", 0, (4,), 1)


def test_forward_shape_errors():
    spec = nnet.NetworkSpec("mlp", 3, (4,), 1)
    params = nnet.init(spec, seed=0)
    with pytest.raises(ValueError):
        nnet.forward(spec, params, [[1.0, 2.0]])
    with pytest.raises(ValueError):
        nnet.forward(spec, params, [[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])


def test_non_finite_loss_names_sample():
    spec = nnet.NetworkSpec("mlp", 1, (), 1, "linear")
    params = nnet.Parameters(np.array([1e100, 0.0]), nnet.shape_table(spec))
    batch = [([[1.0]], [0.0]), ([[1e200]], [0.0])]
    with pytest.raises(ValueError, match="sample 1"):
        nnet.gradients(spec, params, batch, "mse")


def test_bce_requires_sigmoid_head():
    spec = nnet.NetworkSpec("mlp", 2, (3,), 1, "tanh")
    params = nnet.init(spec, seed=0)
    with pytest.raises(ValueError):
        nnet.gradients(spec, params, [([[0.1, 0.2]], [1.0])], "bce")


def test_adam_first_step_magnitude():
    # with a constant unit gradient the very first Adam step moves each
    # coordinate by almost exactly lr
    spec = nnet.NetworkSpec("mlp", 2, (), 1, "linear")
    params = nnet.Parameters(np.zeros(3), nnet.shape_table(spec))
    st = nnet.AdamState.for_params(params, lr=0.1)
    nnet.adam_step(params, np.ones(3), st)
    assert np.allclose(params.data, -0.1, atol=1e-8)
    assert st.step == 1


def test_adam_rejects_mismatched_gradient():
    spec = nnet.NetworkSpec("mlp", 2, (), 1, "linear")
    params = nnet.init(spec, seed=0)
    st = nnet.AdamState.for_params(params)
    with pytest.raises(ValueError):
        nnet.adam_step(params, np.ones(5), st)


def test_training_loop_descends():
    spec = nnet.NetworkSpec("mlp", 1, (8,), 1, "linear")
    params = nnet.init(spec, seed=1)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1, 1, size=64)
    batch = [([[x]], [2.0 * x]) for x in xs]
    st = nnet.AdamState.for_params(params, lr=0.005)
    losses = []
    for _ in range(100):
        loss, grads = nnet.gradients(spec, params, batch, "mse")
        losses.append(loss)
        nnet.adam_step(params, grads, st)
    drops = sum(1 for a, b in zip(losses, losses[1:]) if b < a)
    assert drops >= 90
    assert losses[-1] < losses[0] * 0.1


def test_save_load_round_trip(tmp_path):
    spec = nnet.NetworkSpec("lstm", 3, (4, 2), 1, "sigmoid")
    params = nnet.init(spec, seed=77)
    path = tmp_path / "weights.json"
    nnet.save(spec, params, path)
    spec2, params2 = nnet.load(path)
    assert spec2 == spec
    assert np.array_equal(params2.data, params.data)
    assert params2.table == params.table


def test_load_rejects_bad_files(tmp_path):
    spec = nnet.NetworkSpec("mlp", 2, (3,), 1)
    params = nnet.init(spec, seed=5)
    good = tmp_path / "w.json"
    nnet.save(spec, params, good)
    doc = json.loads(good.read_text())

    wrong_version = dict(doc, version=99)
    p = tmp_path / "v.json"
    p.write_text(json.dumps(wrong_version))
    with pytest.raises(nnet.WeightLoadError, match="version"):
        nnet.load(p)

    truncated = dict(doc, data=doc["data"][:-2])
    p = tmp_path / "t.json"
    p.write_text(json.dumps(truncated))
    with pytest.raises(nnet.WeightLoadError):
        nnet.load(p)

    unknown = dict(doc, arch="cnn")
    p = tmp_path / "a.json"
    p.write_text(json.dumps(unknown))
    with pytest.raises(nnet.WeightLoadError):
        nnet.load(p)

    p = tmp_path / "garbage.json"
    p.write_text("{not json")
    with pytest.raises(nnet.WeightLoadError):
        nnet.load(p)

    bad_value = dict(doc, data=[float("nan")] * len(doc["data"]))
    p = tmp_path / "n.json"
    p.write_text(json.dumps(bad_value).replace("NaN", "null"))
    with pytest.raises(nnet.WeightLoadError):
        nnet.load(p)


def test_gradients_deterministic():
    spec = nnet.NetworkSpec("gru", 2, (4,), 1, "tanh")
    params = nnet.init(spec, seed=8)
    batch = make_batch(np.random.default_rng(3), spec, 4, 3)
    l1, g1 = nnet.gradients(spec, params, batch, "mse")
    l2, g2 = nnet.gradients(spec, params, batch, "mse")
    assert l1 == l2
    assert np.array_equal(g1, g2)
