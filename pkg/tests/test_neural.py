import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from paraslu.config import Hyper
from paraslu.neural import ops
from paraslu.neural.checkpoint import (CheckpointError, ManifestMismatchError, ShapeMismatchError,
                                       TruncatedCheckpointError, VocabMismatchError, from_bytes,
                                       load_checkpoint, save_checkpoint, to_bytes)
from paraslu.neural.gradcheck import grad_check, rel_error
from paraslu.neural.train import fit, pad_batch

from oracles import lstm_reference


# -- LSTM ---------------------------------------------------------------------------

def test_lstm_zero_weights_give_zero_hidden():
    W, b = np.zeros((5, 8), np.float32), np.zeros(8, np.float32)
    h, c, _ = ops.lstm_step(W, b, np.ones(3, np.float32), np.zeros(2, np.float32), np.zeros(2, np.float32))
    assert np.all(h == 0) and np.all(c == 0)


def test_lstm_matches_reference():
    rng = np.random.default_rng(1)
    W, b = rng.normal(size=(5, 8)), rng.normal(size=8)
    x, h, c = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
    got_h, got_c, _ = ops.lstm_step(W, b, x, h, c)
    want_h, want_c = lstm_reference(W, b, x, h, c)
    np.testing.assert_allclose(got_h, want_h, atol=1e-12)
    np.testing.assert_allclose(got_c, want_c, atol=1e-12)


def test_lstm_identical_rows():
    rng = np.random.default_rng(2)
    W, b = ops.uniform_init(rng, (7, 16)), ops.uniform_init(rng, (16,))
    x = np.tile(rng.normal(size=3).astype(np.float32), (2, 1))
    h, _, _ = ops.lstm_step(W, b, x, np.zeros((2, 4), np.float32), np.zeros((2, 4), np.float32))
    assert np.array_equal(h[0], h[1])


def test_lstm_shape_errors():
    with pytest.raises(ops.ShapeError):
        ops.lstm_step(np.zeros((4, 8)), np.zeros(8), np.zeros(3), np.zeros(2), np.zeros(2))
    with pytest.raises(ops.ShapeError):
        ops.lstm_step(np.zeros((5, 8)), np.zeros(8), np.zeros(3), np.zeros(2), np.zeros(3))


def test_masked_steps_carry_state():
    rng = np.random.default_rng(3)
    W, b = rng.normal(size=(5, 8)), rng.normal(size=8)
    xs = rng.normal(size=(1, 4, 3))
    hs, h, c, _ = ops.lstm_forward(W, b, xs, np.array([[1, 1, 0, 0]]))
    hs2, h2, c2, _ = ops.lstm_forward(W, b, xs[:, :2], np.ones((1, 2)))
    assert np.array_equal(h, h2) and np.array_equal(c, c2)
    assert np.array_equal(hs[0, 3], hs2[0, 1])


def test_reverse_index_is_involution():
    idx = ops.reverse_index([3, 1, 4], 4)
    x = np.arange(12).reshape(3, 4, 1)
    assert np.array_equal(ops.gather_time(ops.gather_time(x, idx), idx), x)
    assert idx[0].tolist() == [2, 1, 0, 3]


# -- attention ---------------------------------------------------------------------

def _att_params(rng, d=3, a=4):
    return rng.normal(size=(d, a)), rng.normal(size=(d, a)), rng.normal(size=a)


def test_attention_single_key():
    rng = np.random.default_rng(0)
    keys = rng.normal(size=(1, 1, 3))
    w, ctx, _ = ops.attention(*_att_params(rng), rng.normal(size=(1, 3)), keys)
    assert w.tolist() == [[1.0]]
    np.testing.assert_allclose(ctx[0], keys[0, 0])


def test_attention_identical_keys():
    rng = np.random.default_rng(0)
    k = rng.normal(size=3)
    w, _, _ = ops.attention(*_att_params(rng), rng.normal(size=(1, 3)), np.stack([[k, k]]))
    np.testing.assert_allclose(w, [[0.5, 0.5]])


def test_attention_matches_formula():
    rng = np.random.default_rng(5)
    Wq, Wk, v = _att_params(rng)
    q, keys = rng.normal(size=(1, 3)), rng.normal(size=(1, 3, 3))
    scores = np.array([v @ np.tanh(q[0] @ Wq + keys[0, j] @ Wk) for j in range(3)])
    want = np.exp(scores) / np.exp(scores).sum()
    w, ctx, _ = ops.attention(Wq, Wk, v, q, keys)
    np.testing.assert_allclose(w[0], want, rtol=1e-12)
    np.testing.assert_allclose(ctx[0], want @ keys[0], rtol=1e-12)


@given(st.integers(0, 2**31), st.integers(1, 6))
def test_attention_weights_are_distribution(seed, T):
    rng = np.random.default_rng(seed)
    mask = np.ones((2, T))
    mask[1, T // 2 + 1:] = 0
    w, _, _ = ops.attention(*_att_params(rng), rng.normal(size=(2, 3)), rng.normal(size=(2, T, 3)), mask)
    assert np.all(w >= 0)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(w[mask == 0] < 1e-12)


# -- softmax cross-entropy ---------------------------------------------------------

def test_xent_uniform():
    loss, p = ops.softmax_xent(np.zeros(5), 2)
    np.testing.assert_allclose(p, 0.2)
    assert math.isclose(loss, math.log(5))


def test_xent_confident():
    loss, _ = ops.softmax_xent(np.array([10.0, 0.0]), 0)
    assert math.isclose(loss, math.log1p(math.exp(-10)), rel_tol=1e-9)
    assert abs(loss - 4.54e-5) < 1e-7


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=8), st.floats(-50, 50))
def test_softmax_shift_invariant(logits, c):
    a = ops.softmax(np.array(logits))
    b = ops.softmax(np.array(logits) + c)
    np.testing.assert_allclose(a, b, atol=1e-6)
    assert abs(a.sum() - 1) < 1e-6 and np.all(a >= 0)


def test_xent_target_out_of_range():
    with pytest.raises(IndexError):
        ops.softmax_xent(np.zeros(3), 3)


# -- Adam and clipping -------------------------------------------------------------

def test_adam_zero_grad_keeps_params():
    p = {"w": np.array([1.0, -2.0])}
    ops.Adam(lr=0.1).update(p, {"w": np.zeros(2)})
    assert p["w"].tolist() == [1.0, -2.0]


def test_adam_first_step_magnitude():
    p = {"w": np.array([0.0])}
    ops.Adam(lr=0.1).update(p, {"w": np.array([1.0])})
    # bias-corrected m/sqrt(v) is exactly 1 on the first step
    assert abs(p["w"][0] + 0.1) < 1e-7


def test_adam_deterministic():
    def run():
        p = {"w": np.array([0.3, 0.1])}
        opt = ops.Adam(lr=0.05)
        for k in range(5):
            opt.update(p, {"w": np.array([k, -k], dtype=float)})
        return p["w"]
    assert np.array_equal(run(), run())


def test_adam_shape_mismatch():
    with pytest.raises(ops.ShapeError):
        ops.Adam().update({"w": np.zeros(2)}, {"w": np.zeros(3)})


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert ops.clip_global_norm(g, 1.0) == 5.0
    np.testing.assert_allclose([g["a"][0], g["b"][0]], [0.6, 0.8])


# -- gradient checking --------------------------------------------------------------

def test_rel_error_denominator_floor():
    assert rel_error(0.0, 0.0) == 0.0
    assert rel_error(1e-9, 0.0) == pytest.approx(0.1)


def test_grad_check_linear_xent():
    rng = np.random.default_rng(0)
    x, tgt = rng.normal(size=(3, 6)), np.array([0, 2, 4])

    def frag(p):
        logits = ops.linear(p["W"], p["b"], x)
        loss, d, _ = ops.xent_batch(logits, tgt, np.full(3, 1 / 3))
        _, dW, db = ops.linear_backward(p["W"], x, d)
        return loss, {"W": dW, "b": db}

    assert grad_check(frag, {"W": rng.normal(size=(6, 5)), "b": rng.normal(size=5)}) < 1e-3


def test_grad_check_detects_wrong_gradient():
    def frag(p):
        return float((p["w"] ** 2).sum()), {"w": p["w"]}  # should be 2w
    assert grad_check(frag, {"w": np.array([1.0, 2.0])}) > 0.4


def test_full_models_match_finite_differences():
    from paraslu.gradients import model_gradients
    for name, (an, nu) in model_gradients(seed=7, dim=3).items():
        np.testing.assert_allclose(an, nu, rtol=1e-4, atol=1e-7, err_msg=name)


# -- checkpoints --------------------------------------------------------------------

def tensors():
    rng = np.random.default_rng(0)
    return {"b": rng.normal(size=(3,)).astype(np.float32), "a": rng.normal(size=(2, 2)).astype(np.float32)}


def test_checkpoint_roundtrip_bytes(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(tensors(), {"seed": 1, "vocab_hash": "abc"}, path)
    ck = load_checkpoint(path, vocab_hash="abc")
    assert all(np.array_equal(ck.tensors[k], v) for k, v in tensors().items())
    assert to_bytes(ck.tensors, ck.metadata) == open(path, "rb").read()


def test_checkpoint_layout_little_endian():
    data = to_bytes({"x": np.array([1.0], np.float32)})
    n = int.from_bytes(data[:8], "little")
    assert data[8 + n:] == np.array([1.0], dtype="<f4").tobytes()


def test_checkpoint_errors():
    data = to_bytes(tensors(), {"vocab_hash": "abc"})
    with pytest.raises(TruncatedCheckpointError):
        from_bytes(data[:-4])
    with pytest.raises(TruncatedCheckpointError):
        from_bytes(data[:5])
    with pytest.raises(ManifestMismatchError):
        from_bytes(data + b"\0\0\0\0")
    with pytest.raises(VocabMismatchError):
        from_bytes(data, vocab_hash="xyz")
    with pytest.raises(ShapeMismatchError):
        from_bytes(data, expected_shapes={"a": (4,)})
    assert issubclass(VocabMismatchError, CheckpointError)


# -- training loop ------------------------------------------------------------------

def quadratic_fit(seed, score=None, epochs=5):
    params = {"w": np.zeros(2, np.float32)}
    target = np.array([1.0, -1.0], np.float32)

    def lg(batch):
        d = params["w"] - target
        return float((d ** 2).sum()), {"w": 2 * d * len(batch) / 4}
    hist = fit(params, lg, list(range(8)), Hyper(epochs=epochs, batch_size=4, lr=0.1), seed, score)
    return params, hist


def test_fit_reduces_loss_and_is_deterministic():
    p1, h1 = quadratic_fit(0)
    p2, h2 = quadratic_fit(0)
    assert h1 == h2 and np.array_equal(p1["w"], p2["w"])
    assert h1[-1] < h1[0]


def test_fit_restores_best_epoch():
    scores = iter([0.1, 0.9, 0.5, 0.9, 0.2])
    snapshots = []
    params = {"w": np.zeros(1, np.float32)}

    def lg(batch):
        return 0.0, {"w": np.ones(1, np.float32)}

    def score():
        snapshots.append(params["w"].copy())
        return next(scores)
    fit(params, lg, [0], Hyper(epochs=5, batch_size=1, lr=0.1), 0, score)
    assert np.array_equal(params["w"], snapshots[1])


def test_pad_batch():
    ids, mask, lengths = pad_batch([[5, 6, 7], [8]])
    assert ids.tolist() == [[5, 6, 7], [8, 0, 0]]
    assert mask.tolist() == [[1, 1, 1], [1, 0, 0]]
    assert lengths == [3, 1]
