"""Joint intent classifier and slot tagger with confidence scores.

A bidirectional LSTM encodes the utterance; each position's concatenated
forward/backward state is projected to slot-tag logits, and an additive
attention pool over those states (queried by the two final states) feeds
the intent projection.
"""
from __future__ import annotations

import json
import math
import os
from functools import partial
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import metrics
from .config import ConfigError, Hyper
from .corpus import UNK_ID, Corpus, CorpusError, Vocabulary, build_vocab, encode
from .neural import ops
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.train import fit, pad_batch


@dataclass(frozen=True)
class Parse:
    intent: str
    intent_prob: float
    tags: Tuple[str, ...]
    tag_probs: Tuple[float, ...]
    s_intent: float
    s_slot: float
    s_total: float

    def to_dict(self) -> dict:
        return {
            "intent": self.intent,
            "intent_prob": self.intent_prob,
            "tags": list(self.tags),
            "tag_probs": list(self.tag_probs),
            "s_intent": self.s_intent,
            "s_slot": self.s_slot,
            "s_total": self.s_total,
        }


def confidence(intent_prob: float, tag_probs: Sequence[float]) -> Tuple[float, float, float]:
    """(s_intent, s_slot, s_total): argmax intent probability, geometric mean of
    chosen-tag probabilities, and their minimum."""
    tag_probs = [float(p) for p in tag_probs]
    if not tag_probs:
        raise ValueError("no tag probabilities")
    if not intent_prob > 0 or any(not p > 0 for p in tag_probs):
        raise ArithmeticError("confidence needs strictly positive probabilities")
    s_slot = math.exp(math.fsum(math.log(p) for p in tag_probs) / len(tag_probs))
    s_intent = float(intent_prob)
    return s_intent, s_slot, min(s_intent, s_slot)


def make_parse(intent: str, intent_prob: float, tags: Sequence[str],
               tag_probs: Sequence[float]) -> Parse:
    s_i, s_s, s_t = confidence(intent_prob, tag_probs)
    return Parse(intent, float(intent_prob), tuple(tags), tuple(float(p) for p in tag_probs),
                 s_i, s_s, s_t)


class ParserModel:
    def __init__(self, vocab: Vocabulary, slots: Sequence[str], intents: Sequence[str],
                 hyper: Hyper, params: Optional[Dict[str, np.ndarray]] = None, seed: int = 0):
        self.vocab = vocab
        self.slots = tuple(slots)
        self.intents = tuple(intents)
        self.slot_index = {s: i for i, s in enumerate(self.slots)}
        self.intent_index = {s: i for i, s in enumerate(self.intents)}
        self.hyper = hyper
        self.seed = seed
        self.params = params if params is not None else self._init(seed)
        self.noise = np.random.default_rng([seed, 1])

    def shapes(self) -> Dict[str, tuple]:
        V, E, H, A = len(self.vocab), self.hyper.emb_dim, self.hyper.hidden, self.hyper.attn_dim
        return {
            "emb": (V, E),
            "fwd.W": (E + H, 4 * H), "fwd.b": (4 * H,),
            "bwd.W": (E + H, 4 * H), "bwd.b": (4 * H,),
            "slot.W": (2 * H, len(self.slots)), "slot.b": (len(self.slots),),
            "att.Wq": (2 * H, A), "att.Wk": (2 * H, A), "att.v": (A,),
            "intent.W": (4 * H, len(self.intents)), "intent.b": (len(self.intents),),
        }

    def _init(self, seed):
        rng = np.random.default_rng(seed)
        return {name: ops.uniform_init(rng, shape) for name, shape in sorted(self.shapes().items())}

    # -- forward / backward ------------------------------------------------------

    def forward(self, params, ids, mask, lengths):
        p = params
        H = self.hyper.hidden
        x = ops.embed(p["emb"], ids)
        hf, hfl, _, cf = ops.lstm_forward(p["fwd.W"], p["fwd.b"], x, mask)
        ridx = ops.reverse_index(lengths, ids.shape[1])
        xr = ops.gather_time(x, ridx)
        hbr, hbl, _, cb = ops.lstm_forward(p["bwd.W"], p["bwd.b"], xr, mask)
        hb = ops.gather_time(hbr, ridx)
        states = np.concatenate([hf, hb], axis=-1)
        slot_logits = ops.linear(p["slot.W"], p["slot.b"], states)
        query = np.concatenate([hfl, hbl], axis=-1)
        w, ctx, acache = ops.attention(p["att.Wq"], p["att.Wk"], p["att.v"], query, states, mask)
        z = np.concatenate([ctx, query], axis=-1)
        intent_logits = ops.linear(p["intent.W"], p["intent.b"], z)
        cache = (ids, x, ridx, cf, cb, states, query, acache, z, H)
        return slot_logits, intent_logits, cache

    def backward(self, params, dslot, dintent, cache):
        p = params
        ids, x, ridx, cf, cb, states, query, acache, z, H = cache
        g = {}
        dz, g["intent.W"], g["intent.b"] = ops.linear_backward(p["intent.W"], z, dintent)
        dctx, dquery = dz[:, :2 * H], dz[:, 2 * H:]
        dq2, dstates, g["att.Wq"], g["att.Wk"], g["att.v"] = ops.attention_backward(
            p["att.Wq"], p["att.Wk"], p["att.v"], dctx, acache)
        dquery = dquery + dq2
        ds2, g["slot.W"], g["slot.b"] = ops.linear_backward(p["slot.W"], states, dslot)
        dstates = dstates + ds2
        dhf, dhb = dstates[..., :H], dstates[..., H:]
        dxf, _, _, g["fwd.W"], g["fwd.b"] = ops.lstm_backward(p["fwd.W"], dhf, cf, dh_last=dquery[:, :H])
        dxr, _, _, g["bwd.W"], g["bwd.b"] = ops.lstm_backward(
            p["bwd.W"], ops.gather_time(dhb, ridx), cb, dh_last=dquery[:, H:])
        dx = dxf + ops.gather_time(dxr, ridx)
        g["emb"] = ops.embed_backward(p["emb"], ids, dx)
        return g

    def batch_arrays(self, batch):
        ids, mask, lengths = pad_batch([encode(u.tokens, self.vocab) for u in batch])
        tags = np.zeros(ids.shape, dtype=np.int64)
        for r, u in enumerate(batch):
            tags[r, :len(u.tags)] = [self.slot_index[t] for t in u.tags]
        intents = np.array([self.intent_index[u.intent] for u in batch], dtype=np.int64)
        return ids, mask, lengths, tags, intents

    def loss_and_grads(self, batch, params=None, train=False):
        """Mean over the batch of intent cross-entropy plus per-token mean slot cross-entropy.

        ``train`` enables word dropout.
        """
        params = self.params if params is None else params
        ids, mask, lengths, tags, intents = self.batch_arrays(batch)
        if train:
            ids = ops.word_dropout(self.noise, ids, mask, self.hyper.word_dropout, UNK_ID)
        B = len(batch)
        dtype = params["emb"].dtype
        slot_logits, intent_logits, cache = self.forward(params, ids, mask.astype(dtype), lengths)
        w_slot = (mask / np.array(lengths, dtype=np.float64)[:, None] / B).astype(dtype)
        ls, dslot, _ = ops.xent_batch(slot_logits, tags, w_slot)
        li, dint, _ = ops.xent_batch(intent_logits, intents, np.full(B, 1.0 / B, dtype=dtype))
        return ls + li, self.backward(params, dslot, dint, cache)

    # -- inference ---------------------------------------------------------------

    def predict_probs(self, token_batch: Sequence[Sequence[str]]):
        ids, mask, lengths = pad_batch([encode(t, self.vocab) for t in token_batch])
        slot_logits, intent_logits, _ = self.forward(self.params, ids, mask, lengths)
        return ops.softmax(slot_logits.astype(np.float64)), ops.softmax(intent_logits.astype(np.float64)), lengths

    def parse_batch(self, token_batch: Sequence[Sequence[str]]) -> List[Parse]:
        for t in token_batch:
            if not t:
                raise ValueError("cannot parse an empty utterance")
        out = []
        # one row at a time: float32 matmul rounding depends on batch shape,
        # and a parse must not depend on what else is in the batch
        for tokens in token_batch:
            slot_p, intent_p, (n,) = self.predict_probs([tokens])
            k = int(np.argmax(intent_p[0]))
            tag_ids = np.argmax(slot_p[0, :n], axis=-1)
            tag_probs = slot_p[0, np.arange(n), tag_ids]
            out.append(make_parse(self.intents[k], intent_p[0, k],
                                  [self.slots[j] for j in tag_ids], tag_probs))
        return out

    def parse(self, tokens: Sequence[str]) -> Parse:
        return self.parse_batch([tuple(tokens)])[0]

    # -- persistence -------------------------------------------------------------

    def metadata(self) -> dict:
        return {"kind": "parser", "hyper": self.hyper.to_dict(), "seed": self.seed,
                "vocab_hash": self.vocab.fingerprint()}

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(self.params, self.metadata(), os.path.join(directory, "parser.ckpt"))
        sidecar = {"vocab": list(self.vocab.tokens), "slots": list(self.slots),
                   "intents": list(self.intents)}
        with open(os.path.join(directory, "parser.json"), "w", encoding="utf-8") as f:
            json.dump(sidecar, f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "ParserModel":
        with open(os.path.join(directory, "parser.json"), "r", encoding="utf-8") as f:
            side = json.load(f)
        vocab = Vocabulary(side["vocab"])
        ck = load_checkpoint(os.path.join(directory, "parser.ckpt"), vocab_hash=vocab.fingerprint())
        hyper = Hyper.from_dict(ck.metadata["hyper"])
        model = cls(vocab, side["slots"], side["intents"], hyper, params=ck.tensors,
                    seed=ck.metadata.get("seed", 0))
        load_checkpoint(os.path.join(directory, "parser.ckpt"), expected_shapes=model.shapes())
        return model


def dev_score(model: ParserModel, dev: Corpus) -> float:
    """Mean of intent accuracy and slot F1."""
    parses = model.parse_batch([u.tokens for u in dev])
    acc = metrics.intent_accuracy([p.intent for p in parses], [u.intent for u in dev])
    f1 = metrics.slot_f1([p.tags for p in parses], [u.tags for u in dev])
    return (acc + f1) / 2


def train_parser(train: Corpus, dev: Optional[Corpus], hyper: Hyper, seed: int) -> ParserModel:
    if not isinstance(hyper, Hyper):
        raise ConfigError("hyper must be a Hyper instance")
    if len(train) == 0:
        raise CorpusError("empty training corpus")
    model = ParserModel(build_vocab(train), sorted(train.slot_set), sorted(train.intent_set),
                        hyper, seed=seed)
    examples = list(train)
    score = None
    if dev is not None and len(dev) > 0:
        known = [u for u in dev if u.intent in model.intent_index]
        dev = Corpus(tuple(known))
        if len(dev):
            score = lambda: dev_score(model, dev)  # noqa: E731
    fit(model.params, partial(model.loss_and_grads, train=True), examples, hyper, seed, score=score)
    return model
