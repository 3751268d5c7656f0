#!/usr/bin/env python3
"""Supervised overfit of one (mode, attention) variant on the toy geography set.

Prints one JSON row per evaluation and stops once training exact match
reaches the target.
"""
import argparse
import json
import time

from tsparser.datasets import load_supervised
from tsparser.decode import Linker
from tsparser.learn import TrainConfig, train_supervised
from tsparser.neural.model import ModelConfig, ParserModel
from tsparser.resources import data_path
from tsparser.semantics import load_kb
from tsparser.vocab import build_token_vocab, build_word_vocab


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("td", "bu"), default="td")
    ap.add_argument("--attention", choices=("soft", "structured", "hard", "binomial"), default="soft")
    ap.add_argument("--hidden", type=int, default=150)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--target", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    kb = load_kb(data_path("toy_kb.tsv"))
    data = load_supervised(data_path("toy_geo.jsonl"))
    cfg = ModelConfig(mode=args.mode, attention=args.attention, hidden=args.hidden,
                      attention_dim=args.hidden, feature_dim=args.hidden)
    model = ParserModel(cfg, build_word_vocab([e.words for e in data], kb),
                        build_token_vocab(kb, [e.lf for e in data]), seed=args.seed)
    t = time.perf_counter()
    train_supervised(model, kb, data, config=TrainConfig(epochs=args.epochs, eval_every=5,
                                                         target_train_em=args.target, seed=args.seed),
                     linker=Linker.load(data_path("toy_linker.tsv")),
                     callback=lambda row: "train_em" in row and print(
                         json.dumps({**row, "seconds": round(time.perf_counter() - t, 1)}), flush=True))


if __name__ == "__main__":
    main()
