"""Seeded mini-batch training loop with best-epoch selection."""
from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .ops import Adam, clip_global_norm

log = logging.getLogger(__name__)


def fit(params: Dict[str, np.ndarray],
        loss_and_grads: Callable[[Sequence], tuple],
        examples: Sequence,
        hyper,
        seed: int,
        score: Optional[Callable[[], float]] = None) -> List[float]:
    """Train ``params`` in place with Adam and global-norm clipping.

    ``loss_and_grads(batch) -> (loss, grads)``. If ``score`` is given it is
    evaluated after every epoch and the parameters of the best-scoring epoch
    (earliest on ties) are restored at the end; otherwise the last epoch wins.
    Returns the mean training loss per epoch.
    """
    rng = np.random.default_rng(seed)
    opt = Adam(lr=hyper.lr)
    history = []
    best_score, best_params = -np.inf, None
    n = len(examples)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        if hyper.epoch_examples and n > hyper.epoch_examples:
            order = order[:hyper.epoch_examples]
        total, batches = 0.0, 0
        for start in range(0, len(order), hyper.batch_size):
            batch = [examples[i] for i in order[start:start + hyper.batch_size]]
            loss, grads = loss_and_grads(batch)
            clip_global_norm(grads, hyper.clip)
            opt.update(params, grads)
            total += loss
            batches += 1
        history.append(total / max(batches, 1))
        if score is not None:
            s = score()
            log.debug("epoch %d loss %.4f score %.4f", epoch + 1, history[-1], s)
            if s > best_score:
                best_score = s
                best_params = {k: v.copy() for k, v in params.items()}
        else:
            log.debug("epoch %d loss %.4f", epoch + 1, history[-1])
    if best_params is not None:
        for k, v in best_params.items():
            params[k][...] = v
    return history


def pad_batch(seqs: Sequence[Sequence[int]], pad: int = 0):
    """(ids (B, T), mask (B, T), lengths) for right-padded integer sequences."""
    lengths = [len(s) for s in seqs]
    T = max(lengths)
    ids = np.full((len(seqs), T), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), T), dtype=np.float32)
    for r, s in enumerate(seqs):
        ids[r, :len(s)] = s
        mask[r, :len(s)] = 1.0
    return ids, mask, lengths
