"""Tokenisation and vocabularies for utterance words and logical-form tokens."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .semantics import (EntityLeaf, KnowledgeBase, Number, format_number, is_number_literal,
                        iter_nodes)
from .semantics.funql import Filter
from .transitions import NT_TAGS

UNK = "<unk>"
BLANK = "_blank_"

_WORD = re.compile(rf"{re.escape(BLANK)}|\d+(?:\.\d+)?|[^\W\d_]+", re.UNICODE)


def tokenize(text: str) -> list:
    """Lowercase; split on whitespace and punctuation; digit runs stay whole."""
    return _WORD.findall(text.lower())


def number_literals(words) -> list:
    """Canonical number strings for the numeric words of an utterance, deduplicated."""
    out = []
    for w in words:
        if w[0].isdigit() and is_number_literal(w):
            s = format_number(float(w))
            if s not in out:
                out.append(s)
    return out


_CAMEL = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")


def symbol_words(symbol: str) -> list:
    """Split an entity or relation id into lowercase words (camelCase, _, ., -)."""
    out = []
    for part in re.split(r"[._\-\s/]+", symbol):
        out.extend(w.lower() for w in _CAMEL.findall(part))
    return out


@dataclass
class WordVocab:
    words: list = field(default_factory=lambda: [UNK, BLANK])

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def add(self, w):
        if w not in self.index:
            self.index[w] = len(self.words)
            self.words.append(w)

    def ids(self, words) -> list:
        return [self.index.get(w, 0) for w in words]

    def __len__(self):
        return len(self.words)


@dataclass
class TokenVocab:
    """Logical-form tokens keyed by (kind, symbol); kind is op, entity, relation or number."""

    tokens: list = field(default_factory=lambda: [("op", t) for t in NT_TAGS if t != "relation"])

    def __post_init__(self):
        self.tokens = [tuple(t) for t in self.tokens]
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def add(self, kind, symbol):
        key = (kind, symbol)
        if key not in self.index:
            self.index[key] = len(self.tokens)
            self.tokens.append(key)

    def id(self, kind, symbol) -> int:
        return self.index[(kind, symbol)]

    def get(self, kind, symbol, default=None):
        return self.index.get((kind, symbol), default)

    def of_kind(self, kind) -> list:
        return [s for k, s in self.tokens if k == kind]

    def __len__(self):
        return len(self.tokens)


def build_token_vocab(kb: KnowledgeBase, forms=(), numbers=()) -> TokenVocab:
    """Entities and relations of the KB, plus number literals from the KB's
    numeric objects, the given logical forms and extra literals."""
    v = TokenVocab()
    for e in sorted(kb.entities):
        v.add("entity", e)
    for r in sorted(kb.relations):
        v.add("relation", r)
    lits = set(numbers)
    for t in kb.triples:
        if isinstance(t.object, Number):
            lits.add(format_number(t.object.value))
    for lf in forms:
        for n in iter_nodes(lf):
            if isinstance(n, Filter) and isinstance(n.value, Number):
                lits.add(format_number(n.value.value))
            elif isinstance(n, EntityLeaf) and n.id not in kb.entities:
                raise KeyError(f"logical form uses unknown entity {n.id!r}")
    for s in sorted(lits, key=float):
        v.add("number", s)
    return v


def build_word_vocab(utterances=(), kb: KnowledgeBase | None = None) -> WordVocab:
    """Words of the tokenised utterances plus the words of KB identifiers
    (the latter let ranker features embed logical forms)."""
    v = WordVocab()
    for u in utterances:
        for w in (tokenize(u) if isinstance(u, str) else u):
            v.add(w)
    if kb is not None:
        for sym in sorted(set(kb.entities) | set(kb.relations)):
            for w in symbol_words(sym):
                v.add(w)
    return v
