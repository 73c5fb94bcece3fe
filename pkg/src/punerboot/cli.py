"""Command-line entry point: ``punerboot <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import config as config_mod
from .bootstrap import BootstrapError, run_bootstrap
from .classifier import ClassifierError, load_model, predict, save_model, train
from .corpus import CorpusError, read_conllu, read_gold, read_tagged, write_tagged
from .evaluation import EvaluationError, token_prf, write_report
from .expansion import expand_corpus
from .gazetteer import GazetteerError, label_corpus, load_seed
from .synthgen import SynthError, SynthSpec, write_synth

log = logging.getLogger("punerboot")

INPUT_ERRORS = (OSError, CorpusError, GazetteerError, config_mod.ConfigError, ClassifierError,
                EvaluationError, SynthError)


def _read_corpus(path):
    with open(path, encoding="utf-8") as f:
        return read_conllu(f, default_doc_id=Path(path).stem)


def _read_gold(path, types):
    with open(path, encoding="utf-8") as f:
        return [ta for _, ta in read_gold(f, types)]


def _settings(args):
    cfg = config_mod.load_config(args.config, args.set or ())
    if args.threads is not None:
        cfg["trainer"]["threads"] = args.threads
    return cfg


def _labels(args, cfg, corpus, gaz):
    labels = label_corpus(corpus, gaz)
    expand = cfg["expansion"]["enabled"] if args.expand is None else args.expand
    if expand:
        stats: Counter = Counter()
        labels = expand_corpus(labels, corpus, cfg["expansion"]["relations"], stats)
        if stats["conflicts"]:
            log.info("%d expansion conflicts left unresolved", stats["conflicts"])
    return labels


def cmd_label(args, cfg):
    corpus = _read_corpus(args.corpus)
    gaz = load_seed(args.gazetteer, cfg["entity_types"])
    labels = _labels(args, cfg, corpus, gaz)
    with open(args.out, "w", encoding="utf-8") as f:
        write_tagged(zip(corpus, labels), f)
    n = sum(1 for ta in labels for t in ta.flat_tags() if t.type is not None)
    log.info("labeled %d of %d tokens", n, sum(d.n_tokens for d in corpus))


def cmd_train(args, cfg):
    corpus = _read_corpus(args.corpus)
    gaz = load_seed(args.gazetteer, cfg["entity_types"])
    labels = _labels(args, cfg, corpus, gaz)
    model, traces = train(None, corpus, labels, config_mod.train_config(cfg), cfg["entity_types"])
    if not model.trained_types():
        raise BootstrapError("no entity type had usable positives; nothing was trained")
    save_model(model, args.model_out)
    if args.trace_out:
        Path(args.trace_out).write_text(json.dumps(traces, sort_keys=True) + "\n", encoding="utf-8")


def cmd_predict(args, cfg):
    corpus = _read_corpus(args.corpus)
    model = load_model(args.model)
    tau = cfg["trainer"]["tau"] if args.tau is None else args.tau
    pred = predict(model, corpus, tau)
    with open(args.out, "w", encoding="utf-8") as f:
        write_tagged(zip(corpus, pred), f)


def cmd_eval(args, cfg):
    from . import plotting

    types = cfg["entity_types"]
    gold = _read_gold(args.gold, types)
    with open(args.pred, encoding="utf-8") as f:
        pred = [ta for _, ta in read_tagged(f, types)]
    report = token_prf(gold, pred, types)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.jsonl", "w", encoding="utf-8") as f:
        write_report(report, f)
    (out / "report.txt").write_text(report.table() + "\n", encoding="utf-8")
    plotting.plot_scores(report, out / "scores.png")
    log.info("micro F1 %.4f", report.micro.f1)


def cmd_synth(args, cfg):
    vocab = {}
    for item in args.vocab or ["Component=40"]:
        name, _, n = item.partition("=")
        if name not in cfg["entity_types"]:
            raise SynthError(f"unknown entity type {name!r}")
        vocab[name] = int(n)
    spec = SynthSpec(vocab_sizes=vocab, documents=args.documents, entity_rate=args.entity_rate,
                     compound_rate=args.compound_rate, surface_variants=args.surface_variants,
                     shared_words=args.shared_words, seed=args.seed)
    meta = write_synth(args.out_dir, spec, coverage=args.coverage, test_documents=args.test_documents)
    log.info("wrote %d train and %d test tokens to %s", meta["train_tokens"], meta["test_tokens"], args.out_dir)


def cmd_bootstrap(args, cfg):
    types = cfg["entity_types"]
    corpus = _read_corpus(args.corpus)
    seed = load_seed(args.seed, types)
    gold = _read_gold(args.gold, types) if args.gold else None
    eval_corpus = _read_corpus(args.eval_corpus) if args.eval_corpus else None
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "settings.json").write_text(config_mod.dumps(cfg), encoding="utf-8")
    gaz, _, state = run_bootstrap(corpus, seed, config_mod.bootstrap_config(cfg), run_dir=run_dir,
                                  gold=gold, eval_corpus=eval_corpus, resume=args.resume)
    log.info("finished after %d iterations (converged=%s); dictionary %s",
             state.iteration, state.converged, gaz.counts())


def _add_common(p, suppress=False):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", help="JSON config file (see --show-config for keys and defaults)", **kw)
    # a subcommand keeps its own list so overrides given before the command are not lost
    p.add_argument("--set", action="append", metavar="KEY=VALUE", dest="sub_set" if suppress else "set",
                   help="override one config value, e.g. trainer.prior=0.05 (repeatable)", **kw)
    p.add_argument("--threads", type=int, help="cap on worker threads", **kw)
    p.add_argument("-v", "--verbose", action="store_true", **kw)


def build_parser() -> argparse.ArgumentParser:
    # subcommands repeat the global options so they work on either side of the command name
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)

    parser = argparse.ArgumentParser(prog="punerboot",
                                     description="Dictionary-bootstrapped PU learning for token-level NER.")
    _add_common(parser)
    parser.add_argument("--show-config", action="store_true", help="print the effective config and exit")
    sub = parser.add_subparsers(dest="command")

    def expand_flags(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--expand", dest="expand", action="store_true", default=None)
        g.add_argument("--no-expand", dest="expand", action="store_false")

    p = sub.add_parser("label", parents=[common], help="dictionary (+ expansion) labeling")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gazetteer", required=True)
    expand_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="label a corpus and train one model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gazetteer", required=True)
    expand_flags(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="tag a corpus with a trained model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="token-level precision/recall/F1")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--documents", type=int, default=100)
    p.add_argument("--test-documents", type=int)
    p.add_argument("--vocab", action="append", metavar="TYPE=N")
    p.add_argument("--entity-rate", type=float, default=0.15)
    p.add_argument("--compound-rate", type=float, default=0.3)
    p.add_argument("--coverage", type=float, default=0.5, help="seed dictionary share of the vocabulary")
    p.add_argument("--surface-variants", action="store_true")
    p.add_argument("--distinct-words", dest="shared_words", action="store_false",
                   help="draw every entity phrase from fresh words instead of shared modifiers and cores")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bootstrap", parents=[common], help="run the full bootstrapping loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", required=True, help="seed dictionary file")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--gold", help="gold tags for --eval-corpus, or for --corpus when that is absent")
    p.add_argument("--eval-corpus")
    p.add_argument("--resume", action="store_true", help="continue a partial run directory")
    p.set_defaults(func=cmd_bootstrap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.set = (args.set or []) + getattr(args, "sub_set", [])
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _settings(args)
        if args.show_config:
            sys.stdout.write(config_mod.dumps(cfg))
            return 0
        if not args.command:
            parser.print_usage(sys.stderr)
            return 2
        args.func(args, cfg)
    except FileNotFoundError as exc:
        print(f"punerboot: error: {exc.filename}: no such file", file=sys.stderr)
        return 2
    except INPUT_ERRORS as exc:
        print(f"punerboot: error: {exc}", file=sys.stderr)
        return 2
    except BootstrapError as exc:
        print(f"punerboot: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
