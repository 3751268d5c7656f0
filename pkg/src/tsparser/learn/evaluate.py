"""Exact match, denotation F1, and the answerable / correct fractions."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..decode import beam_decode, entity_mask
from ..semantics import KBError, execute, print_funql
from ..transitions import Limits
from .ranker import rank
from .weak import embeddings_of, is_consistent


def f1(predicted, gold) -> float:
    predicted, gold = set(predicted or ()), set(gold)
    if not predicted and not gold:
        return 1.0
    hit = len(predicted & gold)
    if hit == 0:
        return 0.0
    p, r = hit / len(predicted), hit / len(gold)
    return 2 * p * r / (p + r)


@dataclass
class Report:
    n: int = 0
    exact_match: float | None = None
    f1: float = 0.0
    answerable: float = 0.0
    correct: float = 0.0
    predictions: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {"n": self.n, "exact_match": self.exact_match, "f1": self.f1,
                "answerable": self.answerable, "correct": self.correct}


def _gold_of(ex, kb):
    if hasattr(ex, "lf"):
        try:
            return execute(ex.lf, kb), False
        except KBError:
            return None, False
    return ex.denotation, ex.exactly_one


def evaluate(model, kb, dataset, ranker=None, beam=300, linker=None, limits=Limits()) -> Report:
    """Decode every example with a beam and score the chosen candidate.

    The chosen candidate is the ranker's pick when a ranker is given, else
    the beam's best. Exact match is reported only for examples with gold
    logical forms. Answerable: some beam candidate is consistent with the
    gold denotation; correct: the chosen one is.
    """
    rep = Report(n=len(dataset))
    if not dataset:
        return rep
    emb = embeddings_of(model)
    em = f1_sum = answerable = correct = 0
    has_lf = all(hasattr(ex, "lf") for ex in dataset)
    for ex in dataset:
        cs = beam_decode(model, kb, ex.words, beam, entity_mask(ex.words, linker), limits)
        gold, one = _gold_of(ex, kb)
        chosen = None
        if len(cs):
            chosen = rank(cs, ranker, ex.words, emb) if ranker is not None else cs.best
        den = None if chosen is None else chosen.denotation
        if has_lf and chosen is not None:
            em += print_funql(chosen.lf) == print_funql(ex.lf)
        if gold is not None:
            f1_sum += f1(den, gold)
            answerable += any(is_consistent(c.denotation, gold, one) for c in cs)
            correct += is_consistent(den, gold, one)
        rep.predictions.append(chosen)
    n = len(dataset)
    rep.exact_match = em / n if has_lf else None
    rep.f1, rep.answerable, rep.correct = f1_sum / n, answerable / n, correct / n
    return rep


def beam_sweep(model, kb, dataset, widths, ranker=None, linker=None, limits=Limits()) -> list:
    """(width, answerable fraction, correct fraction) per beam width."""
    return [(w, r.answerable, r.correct)
            for w in widths
            for r in [evaluate(model, kb, dataset, ranker, w, linker, limits)]]
