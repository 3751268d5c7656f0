"""Log-linear reranker over beam candidates."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..neural import tensor as T
from ..neural.optim import MomentumSGD
from ..semantics import Apply, ArgMax, ArgMin, Count, EntityLeaf, Filter, format_number, iter_nodes
from ..vocab import WordVocab, symbol_words

QUESTION_WORDS = ("what", "who", "where", "whose", "date", "which", "how many", "count")

FEATURES = (
    "utterance_lf_cosine",
    "overlap",
    "lemma_utterance_lf_cosine",
    "lemma_overlap",
    "qword_lf_cosine",
    "qword_relation_cosine",
    "answer_type_cosine",
    "denotation_size",
)

# Ordered suffix rules; the first rule whose suffix matches (leaving a stem
# of at least three letters) applies.
LEMMA_RULES = (("ies", "y"), ("sses", "ss"), ("ing", ""), ("ers", "er"), ("ed", ""), ("es", "e"),
               ("s", ""))


class EmptyCandidates(ValueError):
    pass


def lemmatize(word: str, rules=LEMMA_RULES) -> str:
    for suffix, repl in rules:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: len(word) - len(suffix)] + repl
    return word


@dataclass
class Embeddings:
    vocab: WordVocab
    table: np.ndarray

    def mean(self, words):
        rows = [self.vocab.index[w] for w in words if w in self.vocab.index]
        return self.table[rows].mean(axis=0) if rows else None


def _cosine(a, b) -> float:
    if a is None or b is None:
        return 0.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0


def _overlap(a, b) -> int:
    return sum((Counter(a) & Counter(b)).values())


def lf_words(lf) -> list:
    """Words of the entity ids, relation ids and number literals of a logical form."""
    out = []
    for n in iter_nodes(lf):
        if isinstance(n, EntityLeaf):
            out.extend(symbol_words(n.id))
        elif isinstance(n, Apply):
            out.extend(symbol_words(n.relation))
        elif isinstance(n, (ArgMax, ArgMin)):
            out.extend(symbol_words(n.relation))
        elif isinstance(n, Filter):
            out.extend(symbol_words(n.relation))
            out.append(format_number(n.value.value))
    return out


def question_words(words) -> list:
    out = []
    for i, w in enumerate(words):
        if w == "how" and i + 1 < len(words) and words[i + 1] == "many":
            out.extend(["how", "many"])
        elif w in QUESTION_WORDS:
            out.append(w)
    return out


def _outer_relation(lf):
    """Relation id of the outermost relation-bearing node, or None."""
    for n in iter_nodes(lf):
        if isinstance(n, (Apply, ArgMax, ArgMin, Filter)):
            return n.relation
        if not isinstance(n, Count):
            break
    return None


def answer_type_word(relation: str):
    last = relation.split(".")[-1]
    words = symbol_words(last)
    return words[-1] if words else None


def ranker_features(words, lf, denotation, emb: Embeddings, stopwords=frozenset()) -> np.ndarray:
    content = [w for w in words if w not in stopwords]
    lfw = [w for w in lf_words(lf) if w not in stopwords]
    lemma_u = [lemmatize(w) for w in content]
    lemma_l = [lemmatize(w) for w in lfw]

    qw = question_words(words)
    q_vec = emb.mean(qw)
    rel = _outer_relation(lf)
    rel_words = [] if rel is None else symbol_words(rel)
    atype = None if rel is None else answer_type_word(rel)
    feats = np.array([
        _cosine(emb.mean(content), emb.mean(lfw)),
        _overlap(content, lfw),
        _cosine(emb.mean(lemma_u), emb.mean(lemma_l)),
        _overlap(lemma_u, lemma_l),
        _cosine(q_vec, emb.mean(lfw)),
        _cosine(q_vec, emb.mean(rel_words)),
        _cosine(q_vec, emb.mean([atype] if atype else [])),
        0.0 if denotation is None else float(len(denotation)),
    ])
    return np.nan_to_num(feats)


@dataclass
class Ranker:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(len(FEATURES)))
    stopwords: frozenset = frozenset()

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (len(FEATURES),):
            raise ValueError(f"ranker needs {len(FEATURES)} weights, got {self.theta.shape}")

    def features(self, words, candidates, emb: Embeddings) -> np.ndarray:
        return np.stack([ranker_features(words, c.lf, c.denotation, emb, self.stopwords)
                         for c in candidates])

    def scores(self, phi) -> np.ndarray:
        return phi @ self.theta


def rank(candidates, ranker: Ranker, words, emb: Embeddings):
    """Highest phi . theta; ties go to the higher parser log-prob, then the
    lexicographically smaller logical form."""
    cands = list(candidates)
    if not cands:
        raise EmptyCandidates("nothing to rank")
    s = ranker.scores(ranker.features(words, cands, emb))
    best = min(range(len(cands)), key=lambda i: (-s[i], -cands[i].logprob, cands[i].text))
    return cands[best]


def ranker_objective_grad(theta, phi, consistent_mask) -> tuple:
    """log sum_{l in L} p(l) with p = softmax(phi . theta), and its gradient
    E_{p restricted to L}[phi] - E_p[phi]."""
    s = phi @ theta
    m = s.max()
    p = np.exp(s - m)
    log_all = np.log(p.sum()) + m
    pc = np.where(consistent_mask, p, 0.0)
    log_cons = np.log(pc.sum()) + m
    grad = (pc / pc.sum()) @ phi - (p / p.sum()) @ phi
    return log_cons - log_all, grad


def ranker_step(ranker: Ranker, phi, consistent_mask, opt: MomentumSGD) -> float:
    value, grad = ranker_objective_grad(ranker.theta, phi, consistent_mask)
    holder = T.param(ranker.theta, "ranker.theta")
    opt.step({"ranker.theta": holder}, {"ranker.theta": -grad})
    ranker.theta = holder.data
    return value
