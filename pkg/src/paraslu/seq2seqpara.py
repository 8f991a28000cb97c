"""Multi-task sequence-to-sequence paraphraser.

One LSTM encoder feeds two decoders that start from its final state and
attend over its outputs: ``d1`` is trained on the paraphrase target, ``d2``
on reconstructing the input. The embedding table is shared by all three.
"""
from __future__ import annotations

import os
from functools import partial
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import Hyper
from .corpus import BOS_ID, EOS_ID, UNK_ID, CorpusError, Vocabulary, build_vocab, decode, encode
from .metrics import bleu
from .neural import ops
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.train import fit, pad_batch
from .paradata import ParaphrasePair

DECODERS = ("d1", "d2")


@dataclass(frozen=True)
class DecodedPair:
    paraphrase: Tuple[str, ...]
    reconstruction: Tuple[str, ...]


class MultiTaskSeq2Seq:
    def __init__(self, vocab: Vocabulary, hyper: Hyper,
                 params: Optional[Dict[str, np.ndarray]] = None, seed: int = 0):
        self.vocab = vocab
        self.hyper = hyper
        self.seed = seed
        if params is None:
            rng = np.random.default_rng(seed)
            params = {k: ops.uniform_init(rng, s) for k, s in sorted(self.shapes().items())}
        self.params = params
        self.noise = np.random.default_rng([seed, 3])

    def shapes(self):
        V, E, H, A = len(self.vocab), self.hyper.emb_dim, self.hyper.hidden, self.hyper.attn_dim
        shapes = {"emb": (V, E), "enc.W": (E + H, 4 * H), "enc.b": (4 * H,)}
        for d in DECODERS:
            shapes.update({
                f"{d}.W": (E + H, 4 * H), f"{d}.b": (4 * H,),
                f"{d}.Wq": (H, A), f"{d}.Wk": (H, A), f"{d}.v": (A,),
                f"{d}.out.W": (2 * H, V), f"{d}.out.b": (V,),
            })
        return shapes

    # -- training ----------------------------------------------------------------

    def encode_batch(self, p, src_ids, src_mask):
        x = ops.embed(p["emb"], src_ids)
        hs, h, c, cache = ops.lstm_forward(p["enc.W"], p["enc.b"], x, src_mask)
        return x, hs, h, c, cache

    def decoder_forward(self, p, d, enc_hs, enc_mask, h0, c0, dec_in, dec_mask):
        """Teacher-forced decoder pass; returns (logits (B, T', V), cache)."""
        B, Td = dec_in.shape
        H = self.hyper.hidden
        y = ops.embed(p["emb"], dec_in)
        hd, _, _, lcache = ops.lstm_forward(p[f"{d}.W"], p[f"{d}.b"], y, dec_mask, h0, c0)
        q = hd.reshape(B * Td, H)
        keys = np.repeat(enc_hs, Td, axis=0)
        kmask = np.repeat(enc_mask, Td, axis=0)
        _, ctx, acache = ops.attention(p[f"{d}.Wq"], p[f"{d}.Wk"], p[f"{d}.v"], q, keys, kmask)
        z = np.concatenate([q, ctx], axis=-1)
        logits = ops.linear(p[f"{d}.out.W"], p[f"{d}.out.b"], z).reshape(B, Td, -1)
        return logits, (y, lcache, acache, z, B, Td)

    def decoder_backward(self, p, d, dlogits, cache, grads):
        """Accumulates parameter grads; returns (denc_hs, dh0, dc0, dy)."""
        y, lcache, acache, z, B, Td = cache
        H = self.hyper.hidden
        dz, dW, db = ops.linear_backward(p[f"{d}.out.W"], z, dlogits.reshape(B * Td, -1))
        grads[f"{d}.out.W"] = dW
        grads[f"{d}.out.b"] = db
        dq, dctx = dz[:, :H], dz[:, H:]
        dq2, dkeys, grads[f"{d}.Wq"], grads[f"{d}.Wk"], grads[f"{d}.v"] = ops.attention_backward(
            p[f"{d}.Wq"], p[f"{d}.Wk"], p[f"{d}.v"], dctx, acache)
        dhd = (dq + dq2).reshape(B, Td, H)
        denc = dkeys.reshape(B, Td, dkeys.shape[1], H).sum(axis=1)
        dy, dh0, dc0, grads[f"{d}.W"], grads[f"{d}.b"] = ops.lstm_backward(p[f"{d}.W"], dhd, lcache)
        return denc, dh0, dc0, dy

    def batch_arrays(self, batch: Sequence[ParaphrasePair]):
        src_ids, src_mask, _ = pad_batch([encode(pp.source, self.vocab) for pp in batch])
        out = {"src": (src_ids, src_mask)}
        for d, side in zip(DECODERS, ("target", "source")):
            seqs = [[BOS_ID] + encode(getattr(pp, side), self.vocab) + [EOS_ID] for pp in batch]
            ids, mask, _ = pad_batch(seqs)
            out[d] = (ids[:, :-1], ids[:, 1:], mask[:, 1:])
        return out

    def decoder_losses(self, batch, params=None):
        """Per-decoder summed sequence cross-entropy, averaged over the batch."""
        return self._run(batch, params, backward=False)

    def loss_and_grads(self, batch, params=None, train=False):
        """Joint loss ``loss(d1) + loss(d2)`` and its gradients.

        ``train`` enables word dropout on the encoder input.
        """
        losses, grads = self._run(batch, params, backward=True, train=train)
        return losses["d1"] + losses["d2"], grads

    def _run(self, batch, params, backward, train=False):
        p = self.params if params is None else params
        dtype = p["emb"].dtype
        arrs = self.batch_arrays(batch)
        src_ids, src_mask = arrs["src"]
        if train:
            src_ids = ops.word_dropout(self.noise, src_ids, src_mask, self.hyper.word_dropout, UNK_ID)
        src_mask = src_mask.astype(dtype)
        B = len(batch)
        x, enc_hs, h, c, ecache = self.encode_batch(p, src_ids, src_mask)
        losses, caches = {}, {}
        for d in DECODERS:
            dec_in, dec_out, dec_mask = arrs[d]
            dec_mask = dec_mask.astype(dtype)
            logits, cache = self.decoder_forward(p, d, enc_hs, src_mask, h, c, dec_in, dec_mask)
            loss, dlog, _ = ops.xent_batch(logits, dec_out, dec_mask / B)
            losses[d] = loss
            caches[d] = (cache, dlog, dec_in)
        if not backward:
            return losses
        grads = {"emb": np.zeros_like(p["emb"])}
        denc = np.zeros_like(enc_hs)
        dh = np.zeros_like(h)
        dc = np.zeros_like(c)
        for d in DECODERS:
            cache, dlog, dec_in = caches[d]
            de, dh0, dc0, dy = self.decoder_backward(p, d, dlog, cache, grads)
            denc += de
            dh += dh0
            dc += dc0
            grads["emb"] += ops.embed_backward(p["emb"], dec_in, dy)
        dx, _, _, grads["enc.W"], grads["enc.b"] = ops.lstm_backward(p["enc.W"], denc, ecache, dh, dc)
        grads["emb"] += ops.embed_backward(p["emb"], src_ids, dx)
        return losses, grads

    # -- inference ---------------------------------------------------------------

    def step_logits(self, d, prev_ids, h, c, enc_hs, enc_mask, params=None):
        p = self.params if params is None else params
        h, c, _ = ops.lstm_step(p[f"{d}.W"], p[f"{d}.b"], p["emb"][prev_ids], h, c)
        _, ctx, _ = ops.attention(p[f"{d}.Wq"], p[f"{d}.Wk"], p[f"{d}.v"], h, enc_hs, enc_mask)
        logits = np.concatenate([h, ctx], axis=-1) @ p[f"{d}.out.W"] + p[f"{d}.out.b"]
        return logits, h, c

    def greedy(self, token_batch: Sequence[Sequence[str]], max_len: int) -> Dict[str, List[List[str]]]:
        """Greedy decode of both decoders for a batch; EOS stripped."""
        src_ids, src_mask, _ = pad_batch([encode(t, self.vocab) for t in token_batch])
        _, enc_hs, h0, c0, _ = self.encode_batch(self.params, src_ids, src_mask)
        B = len(token_batch)
        out = {}
        for d in DECODERS:
            h, c = h0, c0
            prev = np.full(B, BOS_ID)
            seqs = [[] for _ in range(B)]
            done = np.zeros(B, dtype=bool)
            for _ in range(max_len):
                logits, h, c = self.step_logits(d, prev, h, c, enc_hs, src_mask)
                prev = np.argmax(logits, axis=-1)
                for r in range(B):
                    if not done[r]:
                        if prev[r] == EOS_ID:
                            done[r] = True
                        else:
                            seqs[r].append(int(prev[r]))
                if done.all():
                    break
            out[d] = [decode(s, self.vocab) for s in seqs]
        return out

    def decode_paraphrases(self, tokens: Sequence[str], max_len: Optional[int] = None) -> DecodedPair:
        if not tokens:
            raise ValueError("cannot decode an empty utterance")
        out = self.greedy([tuple(tokens)], max_len or self.hyper.max_len)
        return DecodedPair(tuple(out["d1"][0]), tuple(out["d2"][0]))

    # -- persistence -------------------------------------------------------------

    def save(self, path: str) -> None:
        meta = {"kind": "seq2seq", "hyper": self.hyper.to_dict(), "seed": self.seed,
                "vocab_hash": self.vocab.fingerprint(), "vocab": list(self.vocab.tokens)}
        save_checkpoint(self.params, meta, path)

    @classmethod
    def load(cls, path: str) -> "MultiTaskSeq2Seq":
        ck = load_checkpoint(path)
        vocab = Vocabulary(ck.metadata["vocab"])
        if ck.metadata.get("vocab_hash") != vocab.fingerprint():
            raise CorpusError(f"{path}: vocabulary hash mismatch")
        model = cls(vocab, Hyper.from_dict(ck.metadata["hyper"]), params=ck.tensors,
                    seed=ck.metadata.get("seed", 0))
        load_checkpoint(path, expected_shapes=model.shapes())
        return model


def decode_paraphrases(model: MultiTaskSeq2Seq, tokens: Sequence[str], max_len: int = 30) -> DecodedPair:
    return model.decode_paraphrases(tokens, max_len)


def validation_metric(model, dev_pairs: Sequence[ParaphrasePair], max_len: int = 30) -> float:
    """Mean BLEU of d1 output against the input plus d2 exact-reconstruction accuracy."""
    if not dev_pairs:
        raise ValueError("no validation pairs")
    sources = [tuple(pp.source) for pp in dev_pairs]
    out = model.greedy(sources, max_len)
    b = sum(bleu(out["d1"][i], src) for i, src in enumerate(sources)) / len(sources)
    acc = sum(tuple(out["d2"][i]) == src for i, src in enumerate(sources)) / len(sources)
    return b + acc


def train_multitask(pairs: Sequence[ParaphrasePair], dev_pairs: Sequence[ParaphrasePair],
                    hyper: Hyper, seed: int, vocab: Optional[Vocabulary] = None) -> MultiTaskSeq2Seq:
    if not pairs:
        raise CorpusError("no paraphrase pairs to train on")
    if vocab is None:
        vocab = build_vocab([t for pp in pairs for t in (pp.source, pp.target)])
    model = MultiTaskSeq2Seq(vocab, hyper, seed=seed)
    score = None
    if dev_pairs:
        score = lambda: validation_metric(model, dev_pairs, hyper.max_len)  # noqa: E731
    fit(model.params, partial(model.loss_and_grads, train=True), list(pairs), hyper, seed,
        score=score)
    return model
