"""Language-model paraphraser: blank low-confidence context words, refill them by
constrained beam search with forward and backward LMs, rescore bidirectionally."""
from __future__ import annotations

import os
from functools import partial
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import Hyper
from .corpus import (BLANK, BOS_ID, EOS_ID, RESERVED, UNK_ID, CorpusError, Vocabulary,
                     build_vocab, encode)
from .neural import ops
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.train import fit, pad_batch
from .parser import Parse

OUTSIDE = "O"
FORWARD, BACKWARD = "forward", "backward"


class LanguageModel:
    def __init__(self, vocab: Vocabulary, direction: str, hyper: Hyper,
                 params: Optional[Dict[str, np.ndarray]] = None, seed: int = 0):
        if direction not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown direction {direction!r}")
        self.vocab = vocab
        self.direction = direction
        self.hyper = hyper
        self.seed = seed
        if params is None:
            rng = np.random.default_rng(seed)
            params = {k: ops.uniform_init(rng, s) for k, s in sorted(self.shapes().items())}
        self.params = params
        self.noise = np.random.default_rng([seed, 2])

    def shapes(self):
        V, E, H = len(self.vocab), self.hyper.emb_dim, self.hyper.hidden
        return {"emb": (V, E), "lstm.W": (E + H, 4 * H), "lstm.b": (4 * H,),
                "out.W": (H, V), "out.b": (V,)}

    def orient(self, tokens: Sequence[str]) -> List[str]:
        return list(tokens)[::-1] if self.direction == BACKWARD else list(tokens)

    def loss_and_grads(self, batch, params=None, train=False):
        """Next-token cross-entropy per predicted token, truncated BPTT every ``bptt`` steps.

        ``batch`` holds token sequences already in model orientation; ``train``
        enables word dropout on the inputs.
        """
        p = self.params if params is None else params
        seqs = [[BOS_ID] + encode(s, self.vocab) + [EOS_ID] for s in batch]
        ids, mask, _ = pad_batch(seqs)
        inputs, targets, tmask = ids[:, :-1], ids[:, 1:], mask[:, 1:].astype(p["emb"].dtype)
        if train:
            keep_bos = np.concatenate([np.zeros((len(seqs), 1)), tmask[:, 1:]], axis=1)
            inputs = ops.word_dropout(self.noise, inputs, keep_bos, self.hyper.word_dropout, UNK_ID)
        n_tok = float(tmask.sum())
        B, T = inputs.shape
        H = self.hyper.hidden
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        h = np.zeros((B, H), dtype=p["emb"].dtype)
        c = np.zeros_like(h)
        total = 0.0
        for s in range(0, T, self.hyper.bptt):
            sl = slice(s, min(T, s + self.hyper.bptt))
            x = ops.embed(p["emb"], inputs[:, sl])
            hs, h, c, cache = ops.lstm_forward(p["lstm.W"], p["lstm.b"], x, tmask[:, sl], h, c)
            logits = ops.linear(p["out.W"], p["out.b"], hs)
            loss, dlog, _ = ops.xent_batch(logits, targets[:, sl], tmask[:, sl] / n_tok)
            total += loss
            dhs, dW, db = ops.linear_backward(p["out.W"], hs, dlog)
            grads["out.W"] += dW
            grads["out.b"] += db
            dx, _, _, dW, db = ops.lstm_backward(p["lstm.W"], dhs, cache)
            grads["lstm.W"] += dW
            grads["lstm.b"] += db
            grads["emb"] += ops.embed_backward(p["emb"], inputs[:, sl], dx)
        return total, grads

    # -- incremental scoring -----------------------------------------------------

    def start(self, n: int = 1):
        """Initial state for ``n`` hypotheses: (h, c, next-token log-probs)."""
        return self.step(np.full(n, BOS_ID), None)

    def step(self, ids, state):
        p = self.params
        H = self.hyper.hidden
        n = len(ids)
        if state is None:
            h = np.zeros((n, H), dtype=np.float32)
            c = np.zeros_like(h)
        else:
            h, c = state[0], state[1]
        h, c, _ = ops.lstm_step(p["lstm.W"], p["lstm.b"], p["emb"][ids], h, c)
        logp = ops.log_softmax((h @ p["out.W"] + p["out.b"]).astype(np.float64))
        return h, c, logp

    def log_likelihood(self, tokens: Sequence[str], eos: bool = True) -> Tuple[float, int]:
        """Sum of log-probabilities of ``tokens`` (model orientation) and the number of terms."""
        ids = encode(tokens, self.vocab) + ([EOS_ID] if eos else [])
        state = self.start()
        total = 0.0
        for k, i in enumerate(ids):
            total += float(state[2][0, i])
            if k + 1 < len(ids):
                state = self.step(np.array([i]), state)
        return total, len(ids)

    def perplexity(self, sentences: Sequence[Sequence[str]]) -> float:
        ll, n = 0.0, 0
        for s in sentences:
            a, b = self.log_likelihood(self.orient(s))
            ll += a
            n += b
        return float(np.exp(-ll / n))

    # -- persistence -------------------------------------------------------------

    def save(self, path: str) -> None:
        meta = {"kind": "lm", "direction": self.direction, "hyper": self.hyper.to_dict(),
                "seed": self.seed, "vocab_hash": self.vocab.fingerprint(),
                "vocab": list(self.vocab.tokens)}
        save_checkpoint(self.params, meta, path)

    @classmethod
    def load(cls, path: str) -> "LanguageModel":
        ck = load_checkpoint(path)
        vocab = Vocabulary(ck.metadata["vocab"])
        if ck.metadata.get("vocab_hash") != vocab.fingerprint():
            raise CorpusError(f"{path}: vocabulary hash mismatch")
        lm = cls(vocab, ck.metadata["direction"], Hyper.from_dict(ck.metadata["hyper"]),
                 params=ck.tensors, seed=ck.metadata.get("seed", 0))
        load_checkpoint(path, expected_shapes=lm.shapes())
        return lm


def train_lm(utterances: Sequence[Sequence[str]], direction: str, hyper: Hyper, seed: int,
             vocab: Optional[Vocabulary] = None) -> LanguageModel:
    utterances = [tuple(u) for u in utterances if len(u)]
    if not utterances:
        raise CorpusError("no utterances to train a language model on")
    vocab = vocab or build_vocab(utterances)
    lm = LanguageModel(vocab, direction, hyper, seed=seed)
    fit(lm.params, partial(lm.loss_and_grads, train=True), [lm.orient(u) for u in utterances],
        hyper, seed)
    return lm


# -- templates ----------------------------------------------------------------------

@dataclass(frozen=True)
class Template:
    tokens: Tuple[str, ...]
    keep: Tuple[bool, ...]

    @property
    def blanks(self) -> int:
        return self.keep.count(False)

    def __str__(self):
        return " ".join(t if k else BLANK for t, k in zip(self.tokens, self.keep))

    def reversed(self) -> "Template":
        return Template(self.tokens[::-1], self.keep[::-1])

    def matches(self, candidate: Sequence[str]) -> bool:
        if len(candidate) != len(self.tokens):
            return False
        for tok, keep, c in zip(self.tokens, self.keep, candidate):
            if keep and c != tok:
                return False
            if not keep and c in RESERVED:
                return False
        return True


def build_template(tokens: Sequence[str], parse: Parse) -> Template:
    """Keep slot words and context words whose tag probability beats the context mean."""
    if len(tokens) != len(parse.tags):
        raise ValueError("parse is not aligned with tokens")
    context = [i for i, t in enumerate(parse.tags) if t == OUTSIDE]
    if not context:
        return Template(tuple(tokens), (True,) * len(tokens))
    mean = sum(parse.tag_probs[i] for i in context) / len(context)
    keep = tuple(t != OUTSIDE or p > mean for t, p in zip(parse.tags, parse.tag_probs))
    return Template(tuple(tokens), keep)


# -- constrained beam search ------------------------------------------------------------

@dataclass(frozen=True)
class Hypothesis:
    tokens: Tuple[str, ...]
    logp: float


def constrained_beam_search(lm: LanguageModel, template: Template, width: int = 5) -> List[Hypothesis]:
    """Beam search in ``lm``'s direction forced through the template.

    Keep cells emit their token verbatim (scored as UNK when out of
    vocabulary); each blank emits one non-reserved vocabulary word. Scores
    are summed token log-probabilities. Returned hypotheses are in template
    (left-to-right) order, best first.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    tpl = template.reversed() if lm.direction == BACKWARD else template
    fillable = np.arange(len(RESERVED), len(lm.vocab))
    h, c, logp = lm.start(1)
    beams: List[Tuple[Tuple[str, ...], float]] = [((), 0.0)]
    for tok, keep in zip(tpl.tokens, tpl.keep):
        if keep:
            i = lm.vocab.id(tok)
            beams = [(toks + (tok,), s + float(logp[r, i])) for r, (toks, s) in enumerate(beams)]
            ids = np.full(len(beams), i)
            h, c, logp = lm.step(ids, (h, c))
            continue
        cand = []
        for r, (toks, s) in enumerate(beams):
            scores = s + logp[r, fillable]
            # stable: higher score first, then lower id
            top = np.argsort(-scores, kind="stable")[:width]
            cand.extend((float(scores[j]), r, int(fillable[j])) for j in top)
        cand.sort(key=lambda x: (-x[0], x[1], x[2]))
        cand = cand[:width]
        rows = np.array([r for _, r, _ in cand])
        ids = np.array([i for _, _, i in cand])
        beams = [(beams[r][0] + (lm.vocab.token(i),), s) for s, r, i in cand]
        h, c, logp = lm.step(ids, (h[rows], c[rows]))
    hyps = [Hypothesis(toks[::-1] if lm.direction == BACKWARD else toks, s) for toks, s in beams]
    hyps.sort(key=lambda x: (-x.logp, x.tokens))
    return hyps


def bidirectional_score(lf: LanguageModel, lb: LanguageModel, tokens: Sequence[str]) -> float:
    """Mean of the per-token (EOS included) log-likelihoods under both models."""
    a, n = lf.log_likelihood(list(tokens))
    b, m = lb.log_likelihood(list(tokens)[::-1])
    return (a / n + b / m) / 2


def generate_rnn_paraphrases(lf: LanguageModel, lb: LanguageModel, tokens: Sequence[str],
                             parse: Parse, width: int = 5, k: int = 2,
                             return_scores: bool = False):
    if lf.direction != FORWARD or lb.direction != BACKWARD:
        raise ValueError("need a forward and a backward language model")
    if k > 2 * width:
        raise ValueError("k cannot exceed twice the beam width")
    template = build_template(tokens, parse)
    pool = {h.tokens for h in constrained_beam_search(lf, template, width)}
    pool |= {h.tokens for h in constrained_beam_search(lb, template, width)}
    if not pool:
        raise RuntimeError("beam search produced no hypotheses")
    scored = sorted(((bidirectional_score(lf, lb, t), t) for t in pool), key=lambda x: (-x[0], x[1]))
    scored = scored[:k]
    if return_scores:
        return [(list(t), s) for s, t in scored]
    return [list(t) for _, t in scored]
