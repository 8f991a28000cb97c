"""Forward/backward pairs for the building blocks used by every model.

All functions are dtype-preserving: parameters in float32 give float32
activations, float64 parameters (used by gradient checks) give float64.
Batched inputs put the batch on axis 0.
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float32
INIT_SCALE = 0.08
NEG_INF = -1e9


class ShapeError(ValueError):
    pass


def sigmoid(x):
    # split on sign for stability
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def uniform_init(rng: np.random.Generator, shape, scale=INIT_SCALE, dtype=DTYPE):
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


# -- softmax cross-entropy ----------------------------------------------------

def softmax_xent(logits, target_id: int):
    """Loss and probability vector for one logit vector."""
    logits = np.asarray(logits)
    if not 0 <= target_id < logits.shape[-1]:
        raise IndexError(f"target {target_id} out of range {logits.shape[-1]}")
    logp = log_softmax(logits)
    return float(-logp[target_id]), np.exp(logp)


def xent_batch(logits, targets, weights):
    """Weighted summed cross-entropy over leading axes.

    logits (..., K), integer targets (...), weights (...). Returns
    (loss, dlogits, probs).
    """
    logp = log_softmax(logits)
    probs = np.exp(logp)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = -(picked * weights).sum()
    d = probs * weights[..., None]
    np.put_along_axis(
        d, targets[..., None],
        np.take_along_axis(d, targets[..., None], axis=-1) - weights[..., None],
        axis=-1,
    )
    return float(loss), d.astype(logits.dtype, copy=False), probs


def word_dropout(rng, ids, mask, p, unk_id):
    """Replace unmasked ids by ``unk_id`` with probability ``p``."""
    if p <= 0 or rng is None:
        return ids
    drop = (rng.random(ids.shape) < p) & (mask > 0)
    return np.where(drop, unk_id, ids)


# -- dense layers ---------------------------------------------------------------

def linear(W, b, x):
    return x @ W + b


def linear_backward(W, x, dy):
    """Gradients of y = x W + b for arbitrary leading axes of x."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(axis=0)


def embed(E, ids):
    return E[ids]


def embed_backward(E, ids, dout):
    dE = np.zeros_like(E)
    np.add.at(dE, ids.reshape(-1), dout.reshape(-1, E.shape[1]))
    return dE


# -- LSTM -----------------------------------------------------------------------

def lstm_step(W, b, x, h_prev, c_prev):
    """One LSTM step; W is (in + hidden, 4 * hidden) with gate order i, f, g, o.

    Returns (h, c, cache). Accepts unbatched vectors or (batch, dim) arrays.
    """
    H = h_prev.shape[-1]
    if W.shape != (x.shape[-1] + H, 4 * H) or b.shape != (4 * H,):
        raise ShapeError(
            f"lstm params {W.shape}/{b.shape} do not fit input {x.shape[-1]} hidden {H}"
        )
    if c_prev.shape != h_prev.shape or x.shape[:-1] != h_prev.shape[:-1]:
        raise ShapeError("lstm state/input batch shapes disagree")
    xh = np.concatenate([x, h_prev], axis=-1)
    a = xh @ W + b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H:2 * H])
    g = np.tanh(a[..., 2 * H:3 * H])
    o = sigmoid(a[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (xh, i, f, g, o, c_prev, tc)


def lstm_step_backward(W, dh, dc, cache):
    """Returns (dx, dh_prev, dc_prev, dW, db)."""
    xh, i, f, g, o, c_prev, tc = cache
    H = dh.shape[-1]
    dc = dc + dh * o * (1.0 - tc * tc)
    do = dh * tc
    di = dc * g
    dg = dc * i
    df = dc * c_prev
    da = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        dg * (1.0 - g * g),
        do * o * (1.0 - o),
    ], axis=-1)
    dxh = da @ W.T
    xh2 = xh.reshape(-1, xh.shape[-1])
    da2 = da.reshape(-1, da.shape[-1])
    dW = xh2.T @ da2
    db = da2.sum(axis=0)
    n_in = xh.shape[-1] - H
    return dxh[..., :n_in], dxh[..., n_in:], dc * f, dW, db


def lstm_forward(W, b, xs, mask, h0=None, c0=None):
    """Run an LSTM over (B, T, in) inputs with a (B, T) 0/1 mask.

    Masked steps carry the previous state through unchanged. Returns
    (hs (B, T, H), h_last, c_last, cache).
    """
    B, T, _ = xs.shape
    H = b.shape[0] // 4
    h = np.zeros((B, H), dtype=W.dtype) if h0 is None else h0
    c = np.zeros((B, H), dtype=W.dtype) if c0 is None else c0
    hs = np.empty((B, T, H), dtype=W.dtype)
    caches = []
    m = mask.astype(W.dtype)[..., None]
    for t in range(T):
        hn, cn, cache = lstm_step(W, b, xs[:, t], h, c)
        mt = m[:, t]
        h = mt * hn + (1.0 - mt) * h
        c = mt * cn + (1.0 - mt) * c
        hs[:, t] = h
        caches.append(cache)
    return hs, h, c, (caches, m)


def lstm_backward(W, dhs, cache, dh_last=None, dc_last=None):
    """Backprop through :func:`lstm_forward`.

    Returns (dxs, dh0, dc0, dW, db).
    """
    caches, m = cache
    B, T, H = dhs.shape
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1], dtype=W.dtype)
    n_in = W.shape[0] - H
    dxs = np.empty((B, T, n_in), dtype=W.dtype)
    dh = np.zeros((B, H), dtype=W.dtype) if dh_last is None else dh_last.copy()
    dc = np.zeros((B, H), dtype=W.dtype) if dc_last is None else dc_last.copy()
    for t in reversed(range(T)):
        mt = m[:, t]
        dh = dh + dhs[:, t]
        dx, dhp, dcp, dWt, dbt = lstm_step_backward(W, mt * dh, mt * dc, caches[t])
        dxs[:, t] = dx
        dW += dWt
        db += dbt
        dh = dhp + (1.0 - mt) * dh
        dc = dcp + (1.0 - mt) * dc
    return dxs, dh, dc, dW, db


def reverse_index(lengths, T):
    """Per-row index that reverses each sequence within its length (an involution)."""
    idx = np.tile(np.arange(T), (len(lengths), 1))
    for r, n in enumerate(lengths):
        idx[r, :n] = np.arange(n)[::-1]
    return idx


def gather_time(x, idx):
    return np.take_along_axis(x, idx[..., None], axis=1)


# -- additive attention -----------------------------------------------------------

def attention(Wq, Wk, v, query, keys, mask=None):
    """Additive attention: score_j = v . tanh(query Wq + key_j Wk).

    query (B, Dq), keys (B, T, Dk), mask (B, T). Returns
    (weights (B, T), context (B, Dk), cache).
    """
    if keys.shape[1] < 1:
        raise ShapeError("attention needs at least one key")
    pq = query @ Wq
    pk = keys @ Wk
    u = np.tanh(pk + pq[:, None, :])
    scores = u @ v
    if mask is not None:
        scores = np.where(mask > 0, scores, NEG_INF)
    w = softmax(scores, axis=-1)
    ctx = np.einsum("bt,btd->bd", w, keys)
    return w, ctx, (query, keys, u, w)


def attention_backward(Wq, Wk, v, dctx, cache, dw_extra=None):
    """Returns (dquery, dkeys, dWq, dWk, dv)."""
    query, keys, u, w = cache
    dw = np.einsum("bd,btd->bt", dctx, keys)
    if dw_extra is not None:
        dw = dw + dw_extra
    dkeys = w[..., None] * dctx[:, None, :]
    ds = w * (dw - (w * dw).sum(axis=-1, keepdims=True))
    dv = np.einsum("bt,bta->a", ds, u)
    du = ds[..., None] * v * (1.0 - u * u)
    dpq = du.sum(axis=1)
    dWq = query.T @ dpq
    dquery = dpq @ Wq.T
    dWk = np.einsum("btd,bta->da", keys, du)
    dkeys = dkeys + du @ Wk.T
    return dquery, dkeys, dWq, dWk, dv


# -- optimisation -----------------------------------------------------------------

def clip_global_norm(grads: dict, max_norm: float = 5.0) -> float:
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] *= grads[k].dtype.type(scale)
    return total


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.step = 0

    def update(self, params: dict, grads: dict) -> None:
        self.step += 1
        adam_update(params, grads, self, self.step)


def adam_update(params, grads, state, step, lr=None, beta1=None, beta2=None, eps=None):
    """In-place Adam step ``step`` (1-based) on ``params`` using ``state.m``/``state.v``."""
    lr = state.lr if lr is None else lr
    beta1 = state.beta1 if beta1 is None else beta1
    beta2 = state.beta2 if beta2 is None else beta2
    eps = state.eps if eps is None else eps
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for name in sorted(grads):
        g = grads[name]
        p = params[name]
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
