"""Command-line entry point: ``tsparser <command> ...``.

Exit status is 0 on success, 1 when an input file is malformed or missing,
and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .datasets import (DataError, SupervisedExample, dataset_kind, load_distant, load_supervised,
                       load_weak, weak_record, write_jsonl)
from .decode import Linker, beam_decode, entity_mask
from .learn import (Ranker, beam_sweep, evaluate, synth_distant, train_supervised, train_weak)
from .learn.weak import answer, embeddings_of
from .neural.model import CheckpointError, ParserModel
from .resources import data_path
from .semantics import KBError, dump_kb, format_value, load_kb, parse_kb
from .vocab import build_token_vocab, build_word_vocab, number_literals, tokenize

log = logging.getLogger("tsparser")

SWEEP_DEFAULT = "50,100,200,300,400,500"


class InputError(Exception):
    """Malformed or unreadable input; maps to exit status 1."""


# -- shared loading -------------------------------------------------------------------

def _read(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as err:
        raise InputError(f"{path}: cannot read ({err.strerror})") from None


def _kb(path):
    return parse_kb(_read(path), str(path))


def _linker(path):
    if path is None:
        return None
    try:
        return Linker.parse(_read(path), str(path))
    except ValueError as err:
        raise InputError(str(err)) from None


def _stopwords(path) -> frozenset:
    text = _read(path) if path else data_path("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w for w in text.split() if not w.startswith("#"))


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("mode", "attention", "epochs", "seed"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    return cfg.update(overrides)


class Session:
    """A loaded checkpoint: parser, KB, linker, ranker and run settings."""

    def __init__(self, path):
        self.model, extra = ParserModel.load(path)
        try:
            self.config = RunConfig().update(extra.get("config", {}))
            self.kb = parse_kb(extra["kb"], f"{path}:kb")
            self.linker = Linker.parse(extra["linker"], f"{path}:linker") if extra.get("linker") else None
        except (KeyError, ValueError, KBError) as err:
            raise CheckpointError(f"{path}: incomplete checkpoint ({err})") from None
        theta = extra.get("ranker")
        self.ranker = None if theta is None else Ranker(np.array(theta), frozenset(extra.get("stopwords", ())))
        self.limits = self.config.limits()

    def decode(self, utterance, beam):
        words = tokenize(utterance)
        return beam_decode(self.model, self.kb, words, beam, entity_mask(words, self.linker), self.limits)

    def choose(self, utterance, beam):
        """(chosen candidate or None, candidate set); the ranker picks when present."""
        words = tokenize(utterance)
        if self.ranker is None:
            cs = self.decode(utterance, beam)
            return cs.best, cs
        return answer(self.model, self.ranker, self.kb, words, beam, self.linker, self.limits,
                      embeddings_of(self.model))


def _save(model, path, cfg, kb, linker, ranker=None):
    extra = {"config": cfg.as_dict(), "kb": dump_kb(kb), "linker": linker.text if linker else "",
             "ranker": None if ranker is None else ranker.theta.tolist(),
             "stopwords": sorted(ranker.stopwords) if ranker is not None else []}
    model.save(path, extra)


def _utterances(args):
    if getattr(args, "utterance", None):
        yield " ".join(args.utterance)
        return
    for line in sys.stdin:
        if line.strip():
            yield line.strip()


def _denotation_json(den):
    return None if den is None else sorted(format_value(v) for v in den)


# -- commands -------------------------------------------------------------------------

def cmd_kb_validate(args, out):
    kb = _kb(args.kb)
    print(f"ok: {len(kb.entities)} entities, {len(kb.relations)} relations, "
          f"{len(kb.triples)} triples", file=out)


def cmd_train(args, out):
    cfg = _run_config(args)
    kb = _kb(args.kb)
    linker = _linker(args.linker)
    kind = dataset_kind(args.data)
    if args.regime == "full" and kind != "supervised":
        raise InputError(f"{args.data}: --regime full needs records with an 'lf' field")
    if args.regime == "weak" and kind != "weak":
        raise InputError(f"{args.data}: --regime weak needs records with a 'denotation' field")
    if args.regime == "full":
        train = load_supervised(args.data)
        dev = load_supervised(args.dev) if args.dev else []
    else:
        train = load_weak(args.data, kb)
        dev = load_weak(args.dev, kb) if args.dev else []
    distant = load_weak(args.distant, kb) if args.distant else []
    everything = train + dev + distant
    words = build_word_vocab([ex.words for ex in everything], kb)
    forms = [ex.lf for ex in everything if isinstance(ex, SupervisedExample)]
    numbers = [n for ex in everything for n in number_literals(ex.words)]
    try:
        tokens = build_token_vocab(kb, forms, numbers)
    except KeyError as err:
        raise InputError(f"{args.data}: {err.args[0]}") from None
    model = ParserModel(cfg.model_config(), words, tokens, seed=cfg.seed)
    if args.word_vectors:
        n = model.load_word_vectors(args.word_vectors)
        log.info("initialised %d word vectors from %s", n, args.word_vectors)

    def report(row):
        print(json.dumps(row), file=out, flush=True)

    ranker = None
    if args.regime == "full":
        res = train_supervised(model, kb, train, dev, cfg.train_config(), cfg.limits(), linker, report)
        if res.skipped:
            log.warning("%d examples skipped: oracle ruled out by the masks", res.skipped)
    else:
        ranker = Ranker(stopwords=_stopwords(args.stopwords))
        train_weak(model, ranker, kb, train, cfg.weak_config(), linker, distant, cfg.limits(), report)
    _save(model, args.out, cfg, kb, linker, ranker)
    print(f"saved {args.out}", file=out)


def cmd_synth_distant(args, out):
    kb = _kb(args.kb)
    try:
        examples = synth_distant(load_distant(args.corpus), kb)
    except KBError as err:
        raise InputError(f"{args.corpus}: {err}") from None
    write_jsonl(args.out, [weak_record(ex) for ex in examples])
    print(f"wrote {len(examples)} examples to {args.out}", file=out)


def cmd_parse(args, out):
    s = Session(args.ckpt)
    beam = args.beam or s.config.test_beam
    for utt in _utterances(args):
        print(s.decode(utt, beam).to_json(utt), file=out, flush=True)


def cmd_answer(args, out):
    s = Session(args.ckpt)
    beam = args.beam or s.config.test_beam
    for utt in _utterances(args):
        chosen, _ = s.choose(utt, beam)
        print(json.dumps({"utterance": utt, "lf": chosen.text if chosen else None,
                          "denotation": _denotation_json(chosen.denotation if chosen else None)}),
              file=out, flush=True)


def cmd_eval(args, out):
    s = Session(args.ckpt)
    kind = dataset_kind(args.data)
    data = load_supervised(args.data) if kind == "supervised" else load_weak(args.data, s.kb)
    if args.metric == "em" and kind != "supervised":
        raise InputError(f"{args.data}: exact match needs gold logical forms")
    if args.beam_sweep is not None:
        try:
            widths = [int(w) for w in args.beam_sweep.split(",") if w.strip()]
        except ValueError:
            raise UsageError(f"--beam-sweep expects comma-separated integers, got {args.beam_sweep!r}")
        print("width\tanswerable\tcorrect", file=out)
        for w, a, c in beam_sweep(s.model, s.kb, data, widths, s.ranker, s.linker, s.limits):
            print(f"{w}\t{a:.4f}\t{c:.4f}", file=out)
        return
    rep = evaluate(s.model, s.kb, data, s.ranker, args.beam or s.config.test_beam, s.linker, s.limits)
    score = rep.exact_match if args.metric == "em" else rep.f1
    print(json.dumps({"metric": args.metric, "score": score, **rep.as_dict()}), file=out)


def cmd_repl(args, out):
    s = Session(args.ckpt)
    beam = args.beam or s.config.test_beam
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            print("? ", end="", file=out, flush=True)
        line = sys.stdin.readline()
        if not line:
            break
        utt = line.strip()
        if not utt:
            continue
        if utt in (":q", "quit", "exit"):
            break
        chosen, _ = s.choose(utt, beam)
        if chosen is None:
            print("no logical form found", file=out)
            continue
        print(f"lf: {chosen.text}", file=out)
        den = _denotation_json(chosen.denotation)
        shown = "(fails to execute)" if den is None else ", ".join(den) or "(empty)"
        print(f"answer: {shown}", file=out, flush=True)


# -- argument parsing -----------------------------------------------------------------

class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsparser", description="Transition-based neural semantic parser.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    kb = sub.add_parser("kb", help="knowledge base tools")
    kb_sub = kb.add_subparsers(dest="kb_command", metavar="action")
    kb_sub.required = True
    v = kb_sub.add_parser("validate", help="parse a KB file and report its size")
    v.add_argument("kb", help="tab-separated triples file")
    v.set_defaults(func=cmd_kb_validate)

    t = sub.add_parser("train", help="train a parser (and, for weak data, a ranker)")
    t.add_argument("--regime", choices=("full", "weak"), required=True,
                   help="full: utterance/logical-form pairs; weak: utterance/denotation pairs")
    t.add_argument("--data", required=True, help="training JSON-lines file")
    t.add_argument("--kb", required=True, help="knowledge base TSV")
    t.add_argument("--out", required=True, help="checkpoint to write (.npz)")
    t.add_argument("--config", help="key = value settings file (default: $TSPARSER_CONFIG)")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting; repeatable")
    t.add_argument("--mode", choices=("td", "bu"), help="transition system")
    t.add_argument("--attention", choices=("soft", "structured", "hard", "binomial"), help="attention variant")
    t.add_argument("--epochs", type=int, help="number of training epochs")
    t.add_argument("--seed", type=int, help="random seed for initialisation and shuffling")
    t.add_argument("--dev", help="development JSON-lines file (model selection for --regime full)")
    t.add_argument("--linker", help="phrase<TAB>entity lexicon restricting entity tokens")
    t.add_argument("--distant", help="synthesised weak examples to mix in (--regime weak)")
    t.add_argument("--stopwords", help="stop-word list for ranker features (default: shipped list)")
    t.add_argument("--word-vectors", help="text file of 'word v1 ... vd' rows to initialise embeddings")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("synth-distant", help="blank entity mentions to make weak examples")
    d.add_argument("--corpus", required=True, help="JSON-lines of {tokens, mentions}")
    d.add_argument("--kb", required=True, help="knowledge base TSV")
    d.add_argument("--out", required=True, help="weak JSON-lines file to write")
    d.set_defaults(func=cmd_synth_distant)

    for name, func, helptext in (("parse", cmd_parse, "beam candidates as JSON lines"),
                                 ("answer", cmd_answer, "chosen logical form and its denotation")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--ckpt", required=True, help="checkpoint written by train")
        c.add_argument("--beam", type=int, help="beam width (default: the checkpoint's test beam)")
        c.add_argument("utterance", nargs="*", help="utterance words; read one per line from stdin if absent")
        c.set_defaults(func=func)

    e = sub.add_parser("eval", help="score a checkpoint on a dataset")
    e.add_argument("--ckpt", required=True, help="checkpoint written by train")
    e.add_argument("--data", required=True, help="supervised or weak JSON-lines file")
    e.add_argument("--metric", choices=("em", "f1"), default="f1",
                   help="em: logical-form exact match; f1: mean denotation F1")
    e.add_argument("--beam", type=int, help="beam width (default: the checkpoint's test beam)")
    e.add_argument("--beam-sweep", nargs="?", const=SWEEP_DEFAULT, metavar="W1,W2,...",
                   help=f"print answerable/correct fractions per width (default widths {SWEEP_DEFAULT})")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("repl", help="ask questions interactively")
    r.add_argument("--ckpt", required=True, help="checkpoint written by train")
    r.add_argument("--beam", type=int, help="beam width (default: the checkpoint's test beam)")
    r.set_defaults(func=cmd_repl)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"tsparser: error: {err}", file=sys.stderr)
        return 2
    except (InputError, DataError, KBError, ConfigError, CheckpointError) as err:
        print(f"tsparser: error: {err}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
