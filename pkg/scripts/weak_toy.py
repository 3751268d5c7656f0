#!/usr/bin/env python3
"""Weakly supervised training on the toy utterance/denotation pairs,
then the answerable/correct beam-width sweep on the toy dev set.

The defaults (bottom-up, 20 epochs, training beam 500, test beam 300) take
about four minutes on one core.
"""
import argparse
import json

from tsparser.datasets import load_distant, load_weak
from tsparser.decode import Linker
from tsparser.learn import Ranker, WeakConfig, beam_sweep, evaluate, synth_distant, train_weak
from tsparser.neural.model import ModelConfig, ParserModel
from tsparser.resources import data_path
from tsparser.semantics import load_kb
from tsparser.vocab import build_token_vocab, build_word_vocab


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("td", "bu"), default="bu")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--train-beam", type=int, default=500)
    ap.add_argument("--test-beam", type=int, default=300)
    ap.add_argument("--distant", action="store_true", help="mix in the synthesised toy distant examples")
    ap.add_argument("--widths", default="50,100,200,300,400,500")
    ap.add_argument("--show", action="store_true", help="print the chosen form for every training utterance")
    args = ap.parse_args()

    kb = load_kb(data_path("toy_kb.tsv"))
    linker = Linker.load(data_path("toy_linker.tsv"))
    train = load_weak(data_path("toy_weak.jsonl"), kb)
    dev = load_weak(data_path("toy_weak_dev.jsonl"), kb)
    distant = synth_distant(load_distant(data_path("toy_distant.jsonl")), kb) if args.distant else []
    words = build_word_vocab([e.words for e in train + dev + distant], kb)
    model = ParserModel(ModelConfig(mode=args.mode), words, build_token_vocab(kb))
    ranker = Ranker(stopwords=frozenset(data_path("stopwords.txt").read_text().split()))

    cfg = WeakConfig(epochs=args.epochs, train_beam=args.train_beam, test_beam=args.test_beam)
    train_weak(model, ranker, kb, train, cfg, linker, distant=distant,
               callback=lambda row: print(json.dumps(row), flush=True))
    rep = evaluate(model, kb, train, ranker, args.test_beam, linker)
    print(json.dumps({"split": "train", **rep.as_dict()}))
    if args.show:
        for ex, c in zip(train, rep.predictions):
            print(f"{ex.utterance}\t{c.text if c else None}\t{c is not None and c.denotation == ex.denotation}")
    print("width\tanswerable\tcorrect")
    for w, a, c in beam_sweep(model, kb, dev, [int(x) for x in args.widths.split(",")], ranker, linker):
        print(f"{w}\t{a:.4f}\t{c:.4f}")


if __name__ == "__main__":
    main()
