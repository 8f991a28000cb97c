"""Finite-difference checks for every trainable block, on tiny random models."""
from __future__ import annotations

from typing import Dict

import numpy as np

from .config import Hyper
from .corpus import LabeledUtterance, RESERVED, Vocabulary
from .neural import ops
from .neural.gradcheck import grad_check, rel_error
from .paradata import ParaphrasePair
from .parser import ParserModel
from .rnnpara import BACKWARD, FORWARD, LanguageModel
from .seq2seqpara import MultiTaskSeq2Seq

WORDS = ("a", "b", "c", "d", "e")


def _hyper(dim):
    # bptt covers whole sequences so the LM gradient is exact
    return Hyper(emb_dim=dim, hidden=dim, attn_dim=dim, bptt=64)


def _sentences(rng, n, max_len=5):
    return [tuple(rng.choice(WORDS, size=rng.integers(1, max_len + 1))) for _ in range(n)]


def _scaled(params, rng):
    # larger weights than the training init so gradients are far from zero
    return {k: (v + rng.uniform(-0.5, 0.5, v.shape)).astype(np.float64) for k, v in params.items()}


def _op_checks(rng, dim) -> Dict[str, float]:
    B, T = 2, 3
    x = rng.normal(size=(B, dim))
    h0 = rng.normal(size=(B, dim))
    c0 = rng.normal(size=(B, dim))
    keys = rng.normal(size=(B, T, dim))
    mask = np.ones((B, T))
    mask[1, -1] = 0
    ids = rng.integers(0, 6, size=(B, T))
    wh = rng.normal(size=(B, dim))
    wc = rng.normal(size=(B, dim))
    wctx = rng.normal(size=(B, dim))
    wx = rng.normal(size=(B, T, dim))
    tgt = rng.integers(0, 4, size=B)

    def cell(p):
        # three chained steps, the last one masked for row 1
        hs, h, c, cache = ops.lstm_forward(p["W"], p["b"], p["x"], mask, p["h"], p["c"])
        dx, dh, dc, dW, db = ops.lstm_backward(p["W"], wx, cache, wh, wc)
        loss = (hs * wx).sum() + (h * wh).sum() + (c * wc).sum()
        return float(loss), {"W": dW, "b": db, "x": dx, "h": dh, "c": dc}

    def att(p):
        _, ctx, cache = ops.attention(p["Wq"], p["Wk"], p["v"], p["q"], p["k"], mask)
        dq, dk, dWq, dWk, dv = ops.attention_backward(p["Wq"], p["Wk"], p["v"], wctx, cache)
        return float((ctx * wctx).sum()), {"Wq": dWq, "Wk": dWk, "v": dv, "q": dq, "k": dk}

    def emb(p):
        y = ops.embed(p["E"], ids)
        return float((y * wx).sum()), {"E": ops.embed_backward(p["E"], ids, wx)}

    def proj(p):
        logits = ops.linear(p["W"], p["b"], p["x"])
        loss, dlog, _ = ops.xent_batch(logits, tgt, np.full(B, 0.5))
        dx, dW, db = ops.linear_backward(p["W"], p["x"], dlog)
        return loss, {"W": dW, "b": db, "x": dx}

    return {
        "lstm_cell": grad_check(cell, {"W": rng.normal(scale=0.5, size=(2 * dim, 4 * dim)),
                                       "b": rng.normal(scale=0.5, size=4 * dim),
                                       "x": rng.normal(size=(B, T, dim)), "h": h0, "c": c0}),
        "attention": grad_check(att, {"Wq": rng.normal(size=(dim, dim)), "Wk": rng.normal(size=(dim, dim)),
                                      "v": rng.normal(size=dim), "q": x, "k": keys}),
        "embedding": grad_check(emb, {"E": rng.normal(size=(6, dim))}),
        "projection": grad_check(proj, {"W": rng.normal(size=(dim, 4)), "b": rng.normal(size=4), "x": x}),
    }


def _decoder_check(rng, dim, d) -> float:
    """One seq2seq decoder (embedding, LSTM, attention, output projection) under a
    random linear readout of its logits, including gradients into the encoder states."""
    vocab = Vocabulary(list(RESERVED) + list(WORDS))
    model = MultiTaskSeq2Seq(vocab, _hyper(dim), seed=int(rng.integers(1 << 31)))
    B, S, T = 2, 4, 3
    enc_mask = np.ones((B, S))
    enc_mask[0, -1] = 0
    dec_mask = np.ones((B, T))
    dec_mask[1, -1] = 0
    dec_in = rng.integers(0, len(vocab), size=(B, T))
    readout = rng.normal(size=(B, T, len(vocab)))
    names = [k for k in model.params if k == "emb" or k.startswith(d + ".")]
    params = {k: rng.normal(scale=0.5, size=model.params[k].shape) for k in names}
    params.update(enc=rng.normal(size=(B, S, dim)), h0=rng.normal(size=(B, dim)),
                  c0=rng.normal(size=(B, dim)))

    def frag(p):
        logits, cache = model.decoder_forward(p, d, p["enc"], enc_mask, p["h0"], p["c0"], dec_in, dec_mask)
        g = {}
        denc, dh0, dc0, dy = model.decoder_backward(p, d, readout, cache, g)
        g["emb"] = ops.embed_backward(p["emb"], dec_in, dy)
        g.update(enc=denc, h0=dh0, c0=dc0)
        return float((logits * readout).sum()), g

    return grad_check(frag, params)


def check_all(seed: int, dim: int = 6) -> Dict[str, float]:
    """Max relative error per trainable block for one random seed."""
    if not 1 <= dim <= 8:
        raise ValueError("dim must lie in [1, 8]")
    rng = np.random.default_rng(seed)
    errs = _op_checks(rng, dim)
    for d in ("d1", "d2"):
        errs[f"decoder_{d}"] = _decoder_check(rng, dim, d)
    return errs


def model_gradients(seed: int, dim: int = 4):
    """Analytic and central-difference gradients of full parser, LM and seq2seq losses.

    Returns {model: (analytic, numeric)} with flattened float64 arrays.
    """
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(list(RESERVED) + list(WORDS))
    hyper = _hyper(dim)
    sents = _sentences(rng, 3)
    slots = ("B-x", "I-x", "O")
    batch = [LabeledUtterance(s, tuple(rng.choice(slots, size=len(s))), str(rng.choice(["p", "q"])))
             for s in sents]
    parser = ParserModel(vocab, slots, ("p", "q"), hyper, seed=seed)
    lms = {dr: LanguageModel(vocab, dr, hyper, seed=seed) for dr in (FORWARD, BACKWARD)}
    pairs = [ParaphrasePair(a, b) for a, b in zip(sents, _sentences(rng, 3))]
    s2s = MultiTaskSeq2Seq(vocab, hyper, seed=seed)
    fns = {
        "parser": (lambda p: parser.loss_and_grads(batch, p), parser.params),
        "lm_forward": (lambda p: lms[FORWARD].loss_and_grads(sents, p), lms[FORWARD].params),
        "lm_backward": (lambda p: lms[BACKWARD].loss_and_grads([s[::-1] for s in sents], p),
                        lms[BACKWARD].params),
        "seq2seq": (lambda p: s2s.loss_and_grads(pairs, p), s2s.params),
    }
    out = {}
    for name, (fn, params) in fns.items():
        p = _scaled(params, rng)
        _, g = fn(p)
        an, nu = [], []
        for k in sorted(p):
            flat = p[k].reshape(-1)
            for j in range(flat.size):
                old = flat[j]
                flat[j] = old + 1e-6
                a, _ = fn(p)
                flat[j] = old - 1e-6
                b, _ = fn(p)
                flat[j] = old
                nu.append((a - b) / 2e-6)
            an.append(np.asarray(g[k], dtype=np.float64).reshape(-1))
        out[name] = (np.concatenate(an), np.array(nu))
    return out
