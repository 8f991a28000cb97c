"""Training-size sweeps: train every system on seeded subsamples, score on a fixed test set."""
from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

from . import metrics
from .config import RunConfig
from .corpus import Corpus, CorpusError, build_vocab, subsample
from .paradata import build_paraphrase_dataset
from .parser import ParserModel, train_parser
from .pipeline import HybridParser, hybrid_parse_batch
from .rnnpara import BACKWARD, FORWARD, train_lm
from .seq2seqpara import train_multitask

log = logging.getLogger(__name__)

CSV_FIELDS = ("size", "fold", "intent_acc", "slot_f1", "gated_fraction")


@dataclass(frozen=True)
class Row:
    system: str
    size: int
    fold: int
    intent_acc: float
    slot_f1: float
    gated_fraction: float
    gated_intent_acc: float
    gated_slot_f1: float


@dataclass
class EvalReport:
    rows: List[Row] = field(default_factory=list)

    @property
    def systems(self) -> List[str]:
        return sorted({r.system for r in self.rows})

    def means(self) -> Dict[str, Dict[int, Dict[str, float]]]:
        out: Dict[str, Dict[int, Dict[str, float]]] = {}
        keys = ("intent_acc", "slot_f1", "gated_fraction", "gated_intent_acc", "gated_slot_f1")
        for system in self.systems:
            out[system] = {}
            for size in sorted({r.size for r in self.rows if r.system == system}):
                rs = [r for r in self.rows if r.system == system and r.size == size]
                out[system][size] = {k: sum(getattr(r, k) for r in rs) / len(rs) for k in keys}
        return out

    def to_csv(self, system: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in sorted((r for r in self.rows if r.system == system), key=lambda r: (r.size, r.fold)):
            w.writerow([r.size, r.fold, repr(r.intent_acc), repr(r.slot_f1), repr(r.gated_fraction)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "systems": self.systems,
            "means": {s: {str(k): v for k, v in by.items()} for s, by in self.means().items()},
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True)


@dataclass
class Systems:
    parser: ParserModel
    hybrids: Dict[str, HybridParser]


def train_systems(train: Corpus, config: RunConfig, seed: int, dev: Optional[Corpus] = None) -> Systems:
    """Train the base parser and whichever generators ``config.modes`` needs."""
    parser = train_parser(train, dev, config.parser, seed)
    modes = set(config.modes)
    lms = s2s = None
    if modes & {"rnn", "both"}:
        sents = [u.tokens for u in train]
        vocab = build_vocab(sents)
        lms = (train_lm(sents, FORWARD, config.lm, seed, vocab),
               train_lm(sents, BACKWARD, config.lm, seed, vocab), config.beam_width)
    if modes & {"seq2seq", "both"}:
        s2s = train_multitask(build_paraphrase_dataset(train), [], config.seq2seq, seed)
    hybrids = {}
    for mode in sorted(modes):
        hybrids[f"hybrid_{mode}"] = HybridParser(
            parser, rnn_gen=lms, s2s_gen=s2s, tau=config.tau, mode=mode,
            max_decode_len=config.max_decode_len)
    return Systems(parser, hybrids)


def evaluate(systems: Systems, test: Corpus, tau: float) -> Dict[str, dict]:
    """Metrics per system, including the subset the confidence gate routes to paraphrasing."""
    gold_i = [u.intent for u in test]
    gold_t = [u.tags for u in test]
    base = systems.parser.parse_batch([u.tokens for u in test])
    gated = [k for k, p in enumerate(base) if p.s_total < tau]
    preds = {"base": base}
    for name, hp in systems.hybrids.items():
        voted = hybrid_parse_batch(hp, [u.tokens for u in test]) if gated else None
        preds[name] = [v.parse for v in voted] if voted else base

    def score(parses, idx):
        if not idx:
            return 0.0, 0.0
        return (metrics.intent_accuracy([parses[k].intent for k in idx], [gold_i[k] for k in idx]),
                metrics.slot_f1([parses[k].tags for k in idx], [gold_t[k] for k in idx]))

    everything = list(range(len(test)))
    out = {}
    for name, parses in preds.items():
        acc, f1 = score(parses, everything)
        gacc, gf1 = score(parses, gated)
        out[name] = {"intent_acc": acc, "slot_f1": f1, "gated_fraction": len(gated) / len(test),
                     "gated_intent_acc": gacc, "gated_slot_f1": gf1}
    return out


def _sweep_job(job):
    train, test, size, fold, config, dev = job
    sub = subsample(train, size, seed=fold)
    log.info("size %d fold %d: training", size, fold)
    systems = train_systems(sub, config, seed=fold, dev=dev)
    return [Row(name, size, fold, **m) for name, m in sorted(evaluate(systems, test, config.tau).items())]


def sweep(train: Corpus, test: Corpus, sizes: Sequence[int], folds: int, config: RunConfig,
          dev: Optional[Corpus] = None, jobs: int = 1) -> EvalReport:
    """For each size and fold f in 1..folds: subsample with seed f, train, evaluate.

    Jobs are independent and seeded, so ``jobs > 1`` gives the same report.
    """
    if folds < 1:
        raise CorpusError("folds must be >= 1")
    for n in sizes:
        if n > len(train):
            raise CorpusError(f"size {n} exceeds training corpus of {len(train)}")
    work = [(train, test, size, fold, config, dev) for size in sizes for fold in range(1, folds + 1)]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_sweep_job, work)
    else:
        results = [_sweep_job(w) for w in work]
    return EvalReport([r for rows in results for r in rows])
