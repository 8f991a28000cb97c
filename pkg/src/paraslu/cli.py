"""Command-line entry point: ``paraslu <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, Hyper, RunConfig
from .corpus import CorpusError, build_vocab, load_corpus, save_tsv
from .neural.checkpoint import CheckpointError
from .paradata import build_paraphrase_dataset, load_pairs, recombine, save_pairs
from .parser import ParserModel, train_parser
from .pipeline import HybridParser, hybrid_parse_batch
from .rnnpara import BACKWARD, FORWARD, LanguageModel, train_lm
from .seq2seqpara import MultiTaskSeq2Seq, train_multitask

log = logging.getLogger("paraslu")

HYPER_FLAGS = ("emb_dim", "hidden", "attn_dim", "epochs", "batch_size", "lr", "word_dropout")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.override(seed=getattr(args, "seed", None), tau=getattr(args, "tau", None),
                        beam_width=getattr(args, "beam_width", None),
                        max_decode_len=getattr(args, "max_decode_len", None))


def _hyper(args, base: Hyper) -> Hyper:
    kw = {k: getattr(args, k) for k in HYPER_FLAGS if getattr(args, k, None) is not None}
    return Hyper.from_dict({**base.to_dict(), **kw})


def _corpus(path, fmt):
    if not path:
        raise CorpusError("missing corpus path")
    return load_corpus(path, fmt)


def _lm_paths(directory):
    return os.path.join(directory, "lm.forward.ckpt"), os.path.join(directory, "lm.backward.ckpt")


def _emit(records, out):
    for r in records:
        out.write(json.dumps(r, sort_keys=True) + "\n")


def _read_utterances(stream):
    return [tuple(line.split()) for line in stream if line.strip()]


# -- subcommands -----------------------------------------------------------------

def cmd_train_parser(args):
    cfg = _config(args)
    train = _corpus(args.train or cfg.train, args.format)
    dev = _corpus(args.dev or cfg.dev, args.format) if (args.dev or cfg.dev) else None
    model = train_parser(train, dev, _hyper(args, cfg.parser), cfg.seed)
    model.save(args.out)


def cmd_train_lm(args):
    cfg = _config(args)
    sents = [u.tokens for u in _corpus(args.train or cfg.train, args.format)]
    vocab = build_vocab(sents)
    hyper = _hyper(args, cfg.lm)
    os.makedirs(args.out, exist_ok=True)
    fwd, bwd = _lm_paths(args.out)
    for direction, path in ((FORWARD, fwd), (BACKWARD, bwd)):
        if args.direction in (direction, "both"):
            lm = train_lm(sents, direction, hyper, cfg.seed, vocab)
            log.info("%s LM perplexity on training data: %.3f", direction, lm.perplexity(sents))
            lm.save(path)


def cmd_gen_para_data(args):
    pairs = build_paraphrase_dataset(_corpus(args.train, args.format))
    save_pairs(pairs, args.out)
    log.info("wrote %d pairs to %s", len(pairs), args.out)


def cmd_train_paraphraser(args):
    cfg = _config(args)
    if args.pairs:
        pairs = load_pairs(args.pairs)
    else:
        pairs = build_paraphrase_dataset(_corpus(args.train or cfg.train, args.format))
    dev = load_pairs(args.dev_pairs) if args.dev_pairs else []
    model = train_multitask(pairs, dev, _hyper(args, cfg.seq2seq), cfg.seed)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    model.save(args.out)


def cmd_parse(args):
    model = ParserModel.load(args.model)
    utts = _read_utterances(sys.stdin)
    parses = model.parse_batch(utts) if utts else []
    _emit(({"tokens": list(t), **p.to_dict()} for t, p in zip(utts, parses)), sys.stdout)


def _hybrid(args, cfg, mode):
    parser = ParserModel.load(args.model)
    rnn = s2s = None
    if mode in ("rnn", "both"):
        if not args.lm_dir:
            raise ConfigError(f"mode {mode} needs --lm-dir")
        fwd, bwd = _lm_paths(args.lm_dir)
        rnn = (LanguageModel.load(fwd), LanguageModel.load(bwd), cfg.beam_width)
    if mode in ("seq2seq", "both"):
        if not args.seq2seq:
            raise ConfigError(f"mode {mode} needs --seq2seq")
        s2s = MultiTaskSeq2Seq.load(args.seq2seq)
    return HybridParser(parser, rnn_gen=rnn, s2s_gen=s2s, tau=cfg.tau, mode=mode,
                        max_decode_len=cfg.max_decode_len)


def cmd_hybrid_parse(args):
    cfg = _config(args)
    hp = _hybrid(args, cfg, args.mode)
    utts = _read_utterances(sys.stdin)
    voted = hybrid_parse_batch(hp, utts) if utts else []
    _emit(({"tokens": list(t), "tau": hp.tau, "mode": hp.mode, "provenance": v.provenance,
            **v.parse.to_dict(), "base": v.base.to_dict(),
            "candidates": [c.to_dict() for c in v.candidates], "warnings": list(v.warnings)}
           for t, v in zip(utts, voted)), sys.stdout)


def cmd_eval(args):
    from .evaluation import Systems, evaluate
    cfg = _config(args)
    test = _corpus(args.test or cfg.test, args.format)
    hybrids = {}
    if args.lm_dir:
        hybrids["hybrid_rnn"] = _hybrid(args, cfg, "rnn")
    if args.seq2seq:
        hybrids["hybrid_seq2seq"] = _hybrid(args, cfg, "seq2seq")
    parser = next(iter(hybrids.values())).base if hybrids else ParserModel.load(args.model)
    for hp in hybrids.values():
        hp.base = parser
    result = evaluate(Systems(parser, hybrids), test, cfg.tau)
    text = json.dumps({"tau": cfg.tau, "systems": result}, indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)


def cmd_sweep(args):
    from .evaluation import sweep
    cfg = _config(args)
    train = _corpus(args.train or cfg.train, args.format)
    test = _corpus(args.test or cfg.test, args.format)
    dev = _corpus(args.dev or cfg.dev, args.format) if (args.dev or cfg.dev) else None
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise ConfigError("--sizes is empty")
    report = sweep(train, test, sizes, args.folds, cfg, dev=dev, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    for system in report.systems:
        with open(os.path.join(args.out, f"{system}.csv"), "w", encoding="utf-8", newline="") as f:
            f.write(report.to_csv(system))
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json() + "\n")


def cmd_recombine(args):
    corpus = _corpus(args.train, args.format)
    save_tsv(recombine(corpus, args.n, args.seed if args.seed is not None else 1), args.out)


def cmd_gen_synthetic(args):
    from .synthetic import gen_synthetic
    train, test = gen_synthetic(args.seed if args.seed is not None else 1, args.n_train, args.n_test,
                                args.holdout)
    os.makedirs(args.out, exist_ok=True)
    save_tsv(train, os.path.join(args.out, "train.tsv"))
    save_tsv(test, os.path.join(args.out, "test.tsv"))


def cmd_grad_check(args):
    from .gradients import check_all
    worst = {}
    first = args.seed if args.seed is not None else 0
    for s in range(first, first + args.seeds):
        for block, err in check_all(s, args.dim).items():
            worst[block] = max(worst.get(block, 0.0), err)
    for block, err in sorted(worst.items()):
        print(f"{block:12s} {err:.3e} {'ok' if err < args.tol else 'FAIL'}")
    if max(worst.values()) >= args.tol:
        raise ArithmeticError(f"gradient check failed: max relative error {max(worst.values()):.3e}")


# -- argument parsing ---------------------------------------------------------------

def _add_hyper_flags(p):
    g = p.add_argument_group("model overrides")
    g.add_argument("--emb-dim", dest="emb_dim", type=int)
    g.add_argument("--hidden", type=int)
    g.add_argument("--attn-dim", dest="attn_dim", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--word-dropout", dest="word_dropout", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paraslu", description="Paraphrase-augmented joint intent and slot parsing.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--config", help="JSON run configuration; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--format", default="tsv", choices=("tsv", "parallel", "parallel-files"))
        return p

    p = command("train-parser", cmd_train_parser, "train the joint intent/slot parser")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--out", required=True, help="model directory")
    _add_hyper_flags(p)

    p = command("train-lm", cmd_train_lm, "train forward/backward language models")
    p.add_argument("--train")
    p.add_argument("--direction", default="both", choices=(FORWARD, BACKWARD, "both"))
    p.add_argument("--out", required=True, help="directory for lm.forward.ckpt / lm.backward.ckpt")
    _add_hyper_flags(p)

    p = command("gen-para-data", cmd_gen_para_data, "build the paraphrase pair corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)

    p = command("train-paraphraser", cmd_train_paraphraser, "train the multi-task seq2seq paraphraser")
    p.add_argument("--pairs", help="pair TSV from gen-para-data")
    p.add_argument("--train", help="labeled corpus to build pairs from")
    p.add_argument("--dev-pairs")
    p.add_argument("--out", required=True, help="checkpoint file")
    _add_hyper_flags(p)

    p = command("parse", cmd_parse, "parse utterances from stdin")
    p.add_argument("--model", required=True)

    for name, fn, text in (("hybrid-parse", cmd_hybrid_parse, "confidence-gated paraphrase parsing of stdin"),
                           ("eval", cmd_eval, "score saved models on a test corpus")):
        p = command(name, fn, text)
        p.add_argument("--model", required=True, help="parser directory")
        p.add_argument("--lm-dir")
        p.add_argument("--seq2seq", help="seq2seq checkpoint")
        p.add_argument("--tau", type=float)
        p.add_argument("--beam-width", dest="beam_width", type=int)
        p.add_argument("--max-decode-len", dest="max_decode_len", type=int)
        if name == "hybrid-parse":
            p.add_argument("--mode", default="rnn", choices=("rnn", "seq2seq", "both", "none"),
                           help="paraphrase source; both (pooling all candidates) is experimental")
        else:
            p.add_argument("--test")
            p.add_argument("--out")

    p = command("sweep", cmd_sweep, "train and score all systems over training sizes and folds")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--dev")
    p.add_argument("--sizes", required=True, help="comma-separated training sizes")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--tau", type=float)
    p.add_argument("--out", required=True, help="output directory")

    p = command("recombine", cmd_recombine, "sample slot-swapped utterances")
    p.add_argument("--train", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = command("gen-synthetic", cmd_gen_synthetic, "write a synthetic train/test corpus")
    p.add_argument("--n-train", dest="n_train", type=int, default=500)
    p.add_argument("--n-test", dest="n_test", type=int, default=300)
    p.add_argument("--holdout", type=int, default=2, help="held-out templates per intent")
    p.add_argument("--out", required=True, help="directory for train.tsv and test.tsv")

    p = command("grad-check", cmd_grad_check, "finite-difference check of every trainable block")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--tol", type=float, default=1e-3)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    try:
        args.func(args)
    except (ConfigError, CorpusError, CheckpointError, OSError, ValueError,
            ArithmeticError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"paraslu {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
