"""Random logical forms and knowledge bases, an independent brute-force
executor, and small model factories shared by the test modules."""
from __future__ import annotations

import numpy as np

from tsparser.neural.model import ModelConfig, ParserModel
from tsparser.semantics import (And, Apply, ArgMax, ArgMin, Count, EntityLeaf, EntityRef, Filter,
                                KnowledgeBase, Number, Or, Triple)
from tsparser.semantics.funql import COMPARATORS
from tsparser.vocab import WordVocab, build_token_vocab

ENTITY_RELS = ("r0", "r1", "r2", "r3")
NUMERIC_RELS = ("n0", "n1")


def random_lf(rng, entities, entity_rels=ENTITY_RELS, numeric_rels=NUMERIC_RELS, numbers=(1, 2, 3),
              max_depth=6, root=True):
    """A type-correct logical form of depth <= ``max_depth``.

    Count and numeric relation application appear only at the root, which is
    where strict typing allows number-valued producers.
    """
    if root and max_depth >= 2:
        r = rng.random()
        if r < 0.15:
            return Count(random_lf(rng, entities, entity_rels, numeric_rels, numbers, max_depth - 1, False))
        if r < 0.25 and numeric_rels:
            return Apply(str(rng.choice(numeric_rels)),
                         random_lf(rng, entities, entity_rels, numeric_rels, numbers, max_depth - 1, False))
    if max_depth <= 1 or rng.random() < 0.3:
        return EntityLeaf(str(rng.choice(entities)))

    def sub():
        return random_lf(rng, entities, entity_rels, numeric_rels, numbers, max_depth - 1, False)

    kinds = ["apply", "and", "or"] + (["argmax", "argmin", "filter"] if numeric_rels else [])
    kind = kinds[rng.integers(len(kinds))]
    if kind == "apply":
        return Apply(str(rng.choice(entity_rels)), sub())
    if kind == "and":
        return And(sub(), sub())
    if kind == "or":
        return Or(sub(), sub())
    rel = str(rng.choice(numeric_rels))
    if kind == "argmax":
        return ArgMax(sub(), rel)
    if kind == "argmin":
        return ArgMin(sub(), rel)
    return Filter(str(rng.choice(sorted(COMPARATORS))), sub(), rel, Number(float(rng.choice(numbers))))


def random_kb(rng, n_entities=None, entity_rels=ENTITY_RELS, numeric_rels=NUMERIC_RELS,
              numbers=(1, 2, 3)) -> KnowledgeBase:
    """At most 20 entities; every relation gets at least one triple."""
    n = int(n_entities or rng.integers(2, 21))
    ents = [f"e{i}" for i in range(n)]
    triples = set()
    for r in entity_rels:
        for _ in range(int(rng.integers(1, 2 * n + 1))):
            triples.add(Triple(str(rng.choice(ents)), r, EntityRef(str(rng.choice(ents)))))
    for r in numeric_rels:
        for _ in range(int(rng.integers(1, 2 * n + 1))):
            triples.add(Triple(str(rng.choice(ents)), r, Number(float(rng.choice(numbers)))))
    return KnowledgeBase.build(sorted(triples, key=repr), ents, set(entity_rels) | set(numeric_rels))


# -- brute-force executor ------------------------------------------------------------
#
# Works from the flat triple list with explicit comprehensions, sharing no code
# with the library executor.

def brute_execute(lf, kb: KnowledgeBase) -> frozenset:
    triples = kb.triples
    if isinstance(lf, EntityLeaf):
        return frozenset({EntityRef(lf.id)})
    if isinstance(lf, Apply):
        xs = brute_execute(lf.child, kb)
        return frozenset(t.object for t in triples
                         if t.relation == lf.relation and EntityRef(t.subject) in xs)
    if isinstance(lf, Count):
        return frozenset({Number(len(brute_execute(lf.child, kb)))})
    if isinstance(lf, And):
        a, b = brute_execute(lf.left, kb), brute_execute(lf.right, kb)
        return frozenset(x for x in a if x in b)
    if isinstance(lf, Or):
        a, b = brute_execute(lf.left, kb), brute_execute(lf.right, kb)
        return frozenset(list(a) + list(b))
    xs = [x for x in brute_execute(lf.child, kb) if isinstance(x, EntityRef)]
    values = {x: [t.object.value for t in triples
                  if t.subject == x.id and t.relation == lf.relation and isinstance(t.object, Number)]
              for x in xs}
    values = {x: v for x, v in values.items() if v}
    if isinstance(lf, Filter):
        ops = {"eq": lambda a, b: a == b, "neq": lambda a, b: a != b, "gt": lambda a, b: a > b,
               "lt": lambda a, b: a < b, "ge": lambda a, b: a >= b, "le": lambda a, b: a <= b}
        test = ops[lf.comparator]
        return frozenset(x for x, v in values.items() if any(test(y, lf.value.value) for y in v))
    if not values:
        return frozenset()
    if isinstance(lf, ArgMax):
        per = {x: max(v) for x, v in values.items()}
        top = max(per.values())
    else:
        per = {x: min(v) for x, v in values.items()}
        top = min(per.values())
    return frozenset(x for x, v in per.items() if v == top)


# -- models ---------------------------------------------------------------------------

def tiny_config(mode="td", attention="soft", dim=8, dropout=0.0, **kw) -> ModelConfig:
    return ModelConfig(mode=mode, attention=attention, word_dim=dim, token_dim=dim, hidden=dim,
                       attention_dim=dim, feature_dim=dim, dropout=dropout, **kw)


def tiny_model(kb, words=(), mode="td", attention="soft", dim=8, seed=0, dropout=0.0, forms=()):
    vocab = WordVocab()
    for w in words:
        vocab.add(w)
    return ParserModel(tiny_config(mode, attention, dim, dropout), vocab,
                       build_token_vocab(kb, forms), seed=seed)


def small_kb() -> KnowledgeBase:
    """Three entities with one entity relation and one numeric relation."""
    t = [Triple("a", "r", EntityRef("b")), Triple("a", "r", EntityRef("c")),
         Triple("b", "size", Number(3)), Triple("c", "size", Number(5)), Triple("a", "size", Number(5))]
    return KnowledgeBase.build(t)


def crf_enumerate(u, w) -> np.ndarray:
    """p(A_i = 1) by summing over all 2^k labellings (A_0 = 0)."""
    u = np.asarray(u, dtype=float)
    k = len(u)
    labels = ((np.arange(2 ** k)[:, None] >> np.arange(k)[::-1]) & 1).astype(float)  # (2^k, k)
    prev = np.concatenate([np.zeros((2 ** k, 1)), labels[:, :-1]], axis=1)
    logit = (w[0] * u * labels + w[1] * prev * labels + w[2] * u * prev * labels).sum(axis=1)
    p = np.exp(logit - logit.max())
    p /= p.sum()
    return p @ labels

