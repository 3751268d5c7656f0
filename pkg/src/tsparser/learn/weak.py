"""Training from utterance-denotation pairs: beam search, consistency
filtering, parser updates on consistent forms and ranker updates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..decode import CandidateSet, Linker, beam_decode, entity_mask, prepare
from ..neural import tensor as T
from ..neural.model import ParserModel
from ..neural.optim import MomentumSGD
from ..semantics import KnowledgeBase
from ..transitions import Limits
from .ranker import Embeddings, Ranker, rank, ranker_step
from .supervised import loss_supervised

log = logging.getLogger(__name__)


def is_consistent(denotation, gold, exactly_one=False) -> bool:
    """Exact set equality with the gold denotation; ``exactly_one`` also
    requires a single element."""
    if denotation is None or denotation != gold:
        return False
    return not exactly_one or len(denotation) == 1


@dataclass
class WeakConfig:
    epochs: int = 20
    train_beam: int = 500
    test_beam: int = 300
    lr: float = 0.01
    momentum: float = 0.9
    clip_norm: float | None = 5.0
    ranker_lr: float = 0.01
    distant_ratio: float = 1.0   # distant examples per weak example in each epoch
    max_consistent: int | None = None  # cap on consistent forms per parser update
    seed: int = 0


@dataclass
class StepReport:
    n_candidates: int
    n_consistent: int
    updated: bool
    parser_loss: float = 0.0
    ranker_objective: float = 0.0


def embeddings_of(model: ParserModel) -> Embeddings:
    return Embeddings(model.words, model["word_emb"].data)


def weak_step(model: ParserModel, ranker: Ranker, kb: KnowledgeBase, ex, cfg: WeakConfig,
              opt: MomentumSGD, ranker_opt: MomentumSGD, rng, linker: Linker | None = None,
              limits: Limits = Limits(), candidates: CandidateSet | None = None) -> StepReport:
    """One example: beam, execute, keep consistent forms, update parser and ranker.

    With no consistent form nothing is touched: no gradient is computed and
    neither optimiser is stepped, so parameters and momentum stay as they were.
    """
    prep = prepare(model, kb, ex.words, entity_mask(ex.words, linker), limits)
    if candidates is None:
        candidates = beam_decode(model, kb, ex.words, cfg.train_beam, prep=prep)
    cands = list(candidates)
    mask = np.array([is_consistent(c.denotation, ex.denotation, ex.exactly_one) for c in cands])
    if not mask.any():
        return StepReport(len(cands), 0, False)
    consistent = [c for c, ok in zip(cands, mask) if ok]
    if cfg.max_consistent is not None:
        consistent = consistent[: cfg.max_consistent]
    # ranker features use the embeddings as they were when the beam was scored
    phi = ranker.features(ex.words, cands, embeddings_of(model))

    model.zero_grad()
    losses = [loss_supervised(model, prep, c.derivation, rng, training=True) for c in consistent]
    # uniform weight 1/|L| on each consistent form
    loss = losses[0] if len(losses) == 1 else T.scale(T.sum(T.stack(losses)), 1.0 / len(losses))
    loss.backward()
    opt.step(model.params)
    total = float(loss.data)
    value = ranker_step(ranker, phi, mask, ranker_opt)
    return StepReport(len(cands), int(mask.sum()), True, total, value)


@dataclass
class WeakResult:
    history: list = field(default_factory=list)


def answer(model, ranker, kb, words, beam=300, linker=None, limits=Limits(), emb=None):
    """(chosen candidate or None, candidate set)."""
    cs = beam_decode(model, kb, words, beam, entity_mask(words, linker), limits)
    if not len(cs):
        return None, cs
    return rank(cs, ranker, words, emb or embeddings_of(model)), cs


def train_weak(model: ParserModel, ranker: Ranker, kb: KnowledgeBase, train, config=WeakConfig(),
               linker: Linker | None = None, distant=(), limits=Limits(), callback=None) -> WeakResult:
    """Epochs over the weak examples, mixed with ``distant_ratio`` x as many
    distant examples drawn afresh each epoch."""
    rng = np.random.default_rng(config.seed)
    opt = MomentumSGD(config.lr, config.momentum, config.clip_norm)
    ranker_opt = MomentumSGD(config.ranker_lr, config.momentum)
    result = WeakResult()
    distant = list(distant)
    for epoch in range(1, config.epochs + 1):
        pool = list(train)
        if distant and config.distant_ratio > 0:
            n = min(len(distant), int(round(config.distant_ratio * len(train))))
            pool += [distant[i] for i in rng.choice(len(distant), size=n, replace=False)]
        updated = consistent = 0
        loss = 0.0
        for i in rng.permutation(len(pool)):
            rep = weak_step(model, ranker, kb, pool[i], config, opt, ranker_opt, rng, linker, limits)
            updated += rep.updated
            consistent += rep.n_consistent
            loss += rep.parser_loss
        row = {"epoch": epoch, "examples": len(pool), "updated": updated,
               "mean_consistent": consistent / max(len(pool), 1), "parser_loss": loss / max(updated, 1)}
        result.history.append(row)
        if callback:
            callback(row)
    return result
