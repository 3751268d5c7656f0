"""Grammar-constrained beam search over derivations, entity candidate lookup,
and shared per-utterance preparation used by decoding and training."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attention as att
from .neural import tensor as T
from .neural.layers import StackNode, compose
from .neural.model import Encoded, ParserModel
from .semantics import KBError, KnowledgeBase, execute, format_value, print_funql
from .transitions import (ALL_OPS, ARITY, ENTITY, NUMBER, OP_INDEX, Derivation, Inventory, Limits, Op,
                          Signature, Step, apply_transition, final_form, initial_config,
                          legal_transitions, needs_token, token_slot)
from .vocab import number_literals, tokenize

MAX_PER_SPAN = 10


class DecodeStall(RuntimeError):
    pass


# -- entity candidates --------------------------------------------------------------

@dataclass
class Linker:
    """Phrase dictionary: tokenised phrase -> entity ids in rank order."""

    table: dict = field(default_factory=dict)
    text: str = ""

    @classmethod
    def parse(cls, text: str, source="<linker>") -> "Linker":
        table = {}
        for no, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise ValueError(f"{source}:{no}: expected 'phrase<TAB>entity'")
            key = tuple(tokenize(parts[0]))
            if not key:
                raise ValueError(f"{source}:{no}: empty phrase")
            ents = table.setdefault(key, [])
            if parts[1].strip() not in ents:
                ents.append(parts[1].strip())
        return cls(table, text)

    @classmethod
    def load(cls, path) -> "Linker":
        return cls.parse(Path(path).read_text(encoding="utf-8"), str(path))


def entity_mask(words, linker: Linker | None) -> list:
    """Candidate entities for an utterance by longest-match phrase lookup.

    Matching spans are taken longest first (then leftmost) and may not
    overlap; each contributes at most ``MAX_PER_SPAN`` entities.
    """
    if linker is None or not linker.table:
        return []
    words = list(words)
    longest = max(len(k) for k in linker.table)
    spans = [(i, j) for i in range(len(words)) for j in range(i + 1, min(len(words), i + longest) + 1)
             if tuple(words[i:j]) in linker.table]
    spans.sort(key=lambda s: (-(s[1] - s[0]), s[0]))
    taken, used = [], set()
    for i, j in spans:
        if used.isdisjoint(range(i, j)):
            taken.append((i, j))
            used.update(range(i, j))
    out = []
    for i, j in sorted(taken):
        for e in linker.table[tuple(words[i:j])][:MAX_PER_SPAN]:
            if e not in out:
                out.append(e)
    return out


# -- per-utterance context ------------------------------------------------------------

@dataclass
class Prepared:
    words: list
    enc: Encoded
    sig: Signature
    slot_ids: dict
    slot_masks: dict
    inventory: Inventory
    limits: Limits


def prepare(model: ParserModel, kb: KnowledgeBase, words, candidates=None,
            limits: Limits = Limits()) -> Prepared:
    words = list(words)
    numeric = kb.numeric_relations()
    known = [e for e in (candidates or []) if model.tokens.get("entity", e) is not None]
    slot_ids = model.slot_tokens(numeric, known or None, number_literals(words))
    if model.config.mode == "bu" and limits.max_terminals is None:
        limits = replace(limits, max_terminals=len(words))
    return Prepared(words, model.encode(words), Signature(frozenset(numeric)), slot_ids,
                    model.slot_masks(slot_ids), model.inventory(slot_ids), limits)


def token_key(slot: str, token: str):
    if slot == ENTITY:
        return ("entity", token)
    if slot == NUMBER:
        return ("number", token)
    return ("relation", token)


def op_mask(config, prep: Prepared) -> np.ndarray:
    m = np.zeros(len(ALL_OPS), dtype=bool)
    for op in legal_transitions(config, prep.sig, prep.limits, prep.inventory):
        m[OP_INDEX[op]] = True
    return m


def push_input(model: ParserModel, node: StackNode, op: Op, token_emb):
    """(node to push onto, input embedding, is_open) for one transition."""
    if op.kind in ("NT", "TER"):
        emb = token_emb if token_emb is not None else model.op_embedding(op.tag)
        return node, emb, op.kind == "NT"
    if op.kind == "RED":
        kids, n = [], node
        while not n.is_open:
            kids.append(n.emb)
            n = n.below
        parent, base = n.emb, n.below
    else:  # NTRED
        parent = token_emb if token_emb is not None else model.op_embedding(op.tag)
        kids, n = [], node
        for _ in range(ARITY[op.tag]):
            kids.append(n.emb)
            n = n.below
        base = n
    return base, compose(parent, kids[::-1], model["W_u"]), False


# -- candidates ---------------------------------------------------------------------

@dataclass
class Candidate:
    lf: object
    logprob: float
    denotation: frozenset | None
    derivation: Derivation
    trace: list = field(default_factory=list)

    @property
    def text(self) -> str:
        return print_funql(self.lf)


@dataclass
class CandidateSet:
    candidates: list

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self):
        return len(self.candidates)

    def __getitem__(self, i):
        return self.candidates[i]

    @property
    def best(self) -> Candidate | None:
        return self.candidates[0] if self.candidates else None

    def to_json(self, utterance: str) -> str:
        return json.dumps({"utterance": utterance, "candidates": [
            {"lf": c.text, "logprob": round(c.logprob, 6),
             "denotation": None if c.denotation is None else sorted(format_value(v) for v in c.denotation)}
            for c in self.candidates]})


# -- beam search ----------------------------------------------------------------------

_NO_TOKEN = np.array([-1])


class _Node:
    """Inference-time stack entry holding plain arrays (no tape)."""

    __slots__ = ("h", "c", "emb", "is_open", "below")

    def __init__(self, h, c, emb=None, is_open=False, below=None):
        self.h, self.c, self.emb, self.is_open, self.below = h, c, emb, is_open, below


@dataclass
class _Hyp:
    config: object
    node: _Node
    logprob: float
    steps: tuple = ()
    trace: tuple = ()

    @property
    def finished(self):
        return self.config.is_terminal()


def _token_features(model: ParserModel, prep: Prepared, scores, S, feat_a):
    variant = model.config.attention
    buf = prep.enc.buffer
    if variant == "soft":
        return feat_a, att.soft_weights(scores).data
    if variant == "structured":
        m = att.crf_marginals(scores, model["crf.w"])
        ctx, w = att.structured_attend(m, buf), m.data
    elif variant == "hard":
        idx = np.argmax(scores.data, axis=-1)
        w = np.zeros_like(scores.data)
        w[np.arange(len(idx)), idx] = 1.0
        ctx = T.Tensor(buf.data[idx])
    else:
        ctx = T.Tensor(att.binomial_context_batch(scores.data.copy(), buf.data))
        w = (scores.data > 0).astype(float)
    return model.feature(ctx, S), w


def _log_softmax_rows(z):
    m = z.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return z - (np.log(np.exp(z - m).sum(axis=-1, keepdims=True)) + m)


def beam_decode(model: ParserModel, kb: KnowledgeBase, words, width=300, candidates=None,
                limits: Limits = Limits(), trace=False, prep: Prepared | None = None) -> CandidateSet:
    """Fixed-width beam over joint (transition, token) expansions.

    Finished hypotheses stay in the beam and compete on raw log-probability
    but are not expanded; search ends when every hypothesis in the beam is
    finished. Candidates are executed against ``kb``; identical logical forms
    reached by different derivations are merged keeping the best score.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    mode = model.config.mode
    with T.no_grad():
        prep = prep or prepare(model, kb, words, candidates, limits)
        cell = model.stack_cell
        beam = [_Hyp(initial_config(mode), _Node(cell.h0.data, cell.c0.data), 0.0)]
        while not all(h.finished for h in beam):
            live = [h for h in beam if not h.finished]
            S = T.Tensor(np.stack([h.node.h for h in live]))
            scores = model.scores(prep.enc, S)
            ctx_a = att.soft_attend(scores, prep.enc.buffer)
            feat_a = model.feature(ctx_a, S)
            masks = np.stack([op_mask(h.config, prep) for h in live])
            logits_a = T.linear(feat_a, model["W_oa"], model["b_oa"]).data
            lp_a = _log_softmax_rows(np.where(masks, logits_a, -np.inf))
            feat_y, tok_w = _token_features(model, prep, scores, S, feat_a)
            logits_y = T.linear(feat_y, model["W_oy"], model["b_oy"]).data
            lp_tok = {slot: _log_softmax_rows(logits_y[:, ids])
                      for slot, ids in prep.slot_ids.items() if len(ids)}

            done = [h for h in beam if h.finished]
            parts_score = [np.array([h.logprob for h in done])]
            parts_tok = [np.full(len(done), -1)]
            group_hyp, group_op, group_len = [-1] * len(done), [-1] * len(done), [1] * len(done)
            for b, h in enumerate(live):
                for oi in np.flatnonzero(masks[b]):
                    op = ALL_OPS[oi]
                    base = h.logprob + lp_a[b, oi]
                    if needs_token(op):
                        slot = token_slot(h.config, op, prep.sig)
                        parts_score.append(base + lp_tok[slot][b])
                        parts_tok.append(prep.slot_ids[slot])
                        group_len.append(len(prep.slot_ids[slot]))
                    else:
                        parts_score.append(np.array([base]))
                        parts_tok.append(_NO_TOKEN)
                        group_len.append(1)
                    group_hyp.append(b)
                    group_op.append(oi)
            pool = np.concatenate(parts_score)
            if len(pool) == 0:
                raise DecodeStall("no legal transition for any hypothesis")
            hyp_idx = np.repeat(group_hyp, group_len)
            op_idx = np.repeat(group_op, group_len)
            tok_idx = np.concatenate(parts_tok)
            order = np.argsort(-pool, kind="stable")[:width]
            new_beam, pending = [], []
            for j in order:
                if j < len(done):
                    new_beam.append(done[j])
                else:
                    b = hyp_idx[j]
                    pending.append((live[b], b, ALL_OPS[op_idx[j]], int(tok_idx[j]), float(pool[j])))
            new_beam.extend(_advance(model, prep, pending, tok_w, trace))
            beam = sorted(new_beam, key=lambda h: -h.logprob)
    return _collect(beam, kb, prep)


def _advance(model, prep, pending, tok_w, trace) -> list:
    """Apply the selected expansions, batching compositions and stack-LSTM steps."""
    E = model["token_emb"].data
    W_u = model["W_u"].data
    out, new_hyps, bases, opens = [], [], [], []
    direct, comp_parent, comp_kids = [], [], []
    for h, b, op, tid, score in pending:
        token = model.tokens.tokens[tid][1] if tid >= 0 else None
        config = apply_transition(h.config, op, token, prep.sig)
        entry = ((op, token, tok_w[b] if tid >= 0 else None),) if trace else ()
        new = _Hyp(config, h.node, score, h.steps + (Step(op, token),), h.trace + entry)
        if op.kind == "STOP":
            out.append(new)
            continue
        emb = E[tid] if tid >= 0 else None
        node = h.node
        if op.kind in ("NT", "TER"):
            direct.append((len(new_hyps), emb if emb is not None else E[model.tokens.id("op", op.tag)]))
            bases.append(node)
        else:
            kids = []
            if op.kind == "RED":
                while not node.is_open:
                    kids.append(node.emb)
                    node = node.below
                parent, node = node.emb, node.below
            else:
                parent = emb if emb is not None else E[model.tokens.id("op", op.tag)]
                for _ in range(ARITY[op.tag]):
                    kids.append(node.emb)
                    node = node.below
            comp_parent.append((len(new_hyps), parent))
            comp_kids.append(np.mean(kids, axis=0))
            bases.append(node)
        opens.append(op.kind == "NT")
        new_hyps.append(new)
    if new_hyps:
        X = np.empty((len(new_hyps), E.shape[1]))
        for i, v in direct:
            X[i] = v
        if comp_parent:
            rows = [i for i, _ in comp_parent]
            X[rows] = np.concatenate([np.stack([p for _, p in comp_parent]), np.stack(comp_kids)], axis=1) @ W_u.T
        cell = model.stack_cell
        hs = np.stack([n.h for n in bases])
        cs = np.stack([n.c for n in bases])
        h_new, c_new = T.lstm_cell(T.Tensor(X), T.Tensor(hs), T.Tensor(cs), cell.W, cell.b)
        for i, hyp in enumerate(new_hyps):
            hyp.node = _Node(h_new.data[i], c_new.data[i], X[i], opens[i], bases[i])
            out.append(hyp)
    return out


def _collect(beam, kb, prep) -> CandidateSet:
    best = {}
    for h in beam:
        lf = final_form(h.config)
        key = print_funql(lf)
        if key in best and best[key].logprob >= h.logprob:
            continue
        try:
            den = execute(lf, kb)
        except KBError:
            den = None
        trace = [(str(op), tok, None if w is None else list(zip(prep.words, w.tolist())))
                 for op, tok, w in h.trace]
        best[key] = Candidate(lf, h.logprob, den, Derivation(h.config.mode, h.steps), trace)
    return CandidateSet(sorted(best.values(), key=lambda c: (-c.logprob, c.text)))


def greedy_decode(model: ParserModel, kb: KnowledgeBase, words, candidates=None,
                  limits: Limits = Limits(), trace=False) -> Candidate:
    """Best single derivation: at each step the highest-scoring (op, token) pair."""
    cs = beam_decode(model, kb, words, 1, candidates, limits, trace)
    if not len(cs):
        raise DecodeStall("greedy search produced no derivation")
    return cs.best


def trace_lines(candidate: Candidate, variant: str) -> list:
    """JSON-lines attention trace of the token-emitting steps of a decoded candidate."""
    out = []
    for i, (op, tok, pairs) in enumerate(candidate.trace):
        if pairs is None:
            continue
        words = [w for w, _ in pairs]
        out.append(att.trace_line(words, i, op, tok, variant, [a for _, a in pairs]))
    return out
