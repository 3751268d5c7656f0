"""Distant supervision: blank out one entity mention of a declarative
sentence and ask for it back."""
from __future__ import annotations

import logging

from ..datasets import DistantSentence, WeakExample
from ..semantics import EntityRef, KnowledgeBase, UnknownSymbol
from ..vocab import BLANK

log = logging.getLogger(__name__)


class SkippedSentence(ValueError):
    pass


def synth_sentence(sentence: DistantSentence, kb: KnowledgeBase | None = None) -> list:
    """One example per mention; the masked entity is the denotation.

    A mention preceded by "the" yields an exactly-one-entity constraint.
    """
    if len(sentence.mentions) < 2:
        raise SkippedSentence(f"needs two or more entity mentions, has {len(sentence.mentions)}")
    out = []
    for m in sentence.mentions:
        if kb is not None and m.entity not in kb.entities:
            raise UnknownSymbol(f"mention entity {m.entity!r} is not in the knowledge base")
        i, j = m.span
        toks = sentence.tokens[:i] + [BLANK] + sentence.tokens[j:]
        exactly_one = i > 0 and sentence.tokens[i - 1].lower() == "the"
        out.append(WeakExample(" ".join(toks), frozenset([EntityRef(m.entity)]), exactly_one))
    return out


def synth_distant(sentences, kb: KnowledgeBase | None = None) -> list:
    out = []
    for n, s in enumerate(sentences, 1):
        try:
            out.extend(synth_sentence(s, kb))
        except SkippedSentence as err:
            log.info("sentence %d skipped: %s", n, err)
    return out
