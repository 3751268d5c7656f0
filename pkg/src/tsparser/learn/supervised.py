"""Teacher forcing along oracle derivations, the supervised objective, the
REINFORCE surrogate for sampled attention, and the supervised training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import attention as att
from ..decode import Prepared, entity_mask, greedy_decode, op_mask, prepare, push_input, token_key
from ..neural import tensor as T
from ..neural.model import ParserModel
from ..neural.optim import MomentumSGD
from ..semantics import KnowledgeBase, print_funql
from ..transitions import OP_INDEX, Derivation, Limits, apply_transition, initial_config, oracle, token_slot

log = logging.getLogger(__name__)

SAMPLED = ("hard", "binomial")


class OracleInadmissible(ValueError):
    """The oracle derivation uses an op or token the masks rule out for this utterance."""


@dataclass
class ForcedPass:
    action_lp: list = field(default_factory=list)    # log p(a_t)
    token_lp: list = field(default_factory=list)     # log p(y_t | u_t)
    attention_lp: list = field(default_factory=list)  # log p(u_t), sampled variants only
    baseline: list = field(default_factory=list)     # soft-attention log p(y_t), detached
    choices: list = field(default_factory=list)

    def log_likelihood(self) -> T.Tensor:
        terms = self.action_lp + self.token_lp
        return terms[0] if len(terms) == 1 else T.sum(T.stack(terms))


def teacher_force(model: ParserModel, prep: Prepared, derivation: Derivation, rng=None,
                  training=False, choices=None) -> ForcedPass:
    """Run the model along ``derivation`` on the tape.

    ``rng`` drives dropout (when ``training``) and attention sampling for the
    hard and binomial variants; without it those variants use their
    inference rule. ``choices`` forces the attention choice of each token step.
    """
    variant = model.config.attention
    out = ForcedPass()
    config = initial_config(derivation.mode)
    node = model.stack_start()
    sample_rng = rng if training else None
    k = 0
    for op, token in derivation.steps:
        s = node.h
        mask = op_mask(config, prep)
        if not mask[OP_INDEX[op]]:
            raise OracleInadmissible(f"{op} is not legal after {config.render()!r}")
        scores = model.scores(prep.enc, s)
        ctx_a = att.soft_attend(scores, prep.enc.buffer)
        feat_a = model.feature(ctx_a, s, rng, training)
        out.action_lp.append(T.getitem(model.action_log_probs(feat_a, mask), OP_INDEX[op]))

        emb = None
        if token is not None:
            slot = token_slot(config, op, prep.sig)
            tid = model.tokens.get(*token_key(slot, token))
            if tid is None or not prep.slot_masks[slot][tid]:
                raise OracleInadmissible(f"token {token!r} is not admissible in slot {slot}")
            tmask = prep.slot_masks[slot]
            if variant == "soft":
                feat_y = feat_a
            else:
                forced = None if choices is None else choices[k]
                ctx_y, lp_u, w = model.token_context(prep.enc, scores, sample_rng, forced)
                feat_y = model.feature(ctx_y, s, rng, training)
                if lp_u is not None:
                    out.attention_lp.append(lp_u)
                    out.choices.append(int(np.argmax(w)) if variant == "hard" else w.astype(bool))
                    with T.no_grad():
                        soft = model.token_log_probs(model.feature(ctx_a, s), tmask)
                    out.baseline.append(float(soft.data[tid]))
            out.token_lp.append(T.getitem(model.token_log_probs(feat_y, tmask), tid))
            emb = T.getitem(model["token_emb"], tid)
            k += 1
        config = apply_transition(config, op, token, prep.sig)
        if op.kind != "STOP":
            base, x, is_open = push_input(model, node, op, emb)
            node = model.push(base, x, is_open)
    return out


def loss_supervised(model, prep, derivation, rng=None, training=False, choices=None) -> T.Tensor:
    """Negative log-likelihood of the oracle actions and tokens.

    For hard and binomial attention under training this is the REINFORCE
    surrogate, whose gradient is the score-function estimator with the soft
    baseline; its value is still the negative log-likelihood.
    """
    fp = teacher_force(model, prep, derivation, rng, training, choices)
    return surrogate_loss(fp)


def surrogate_loss(fp: ForcedPass) -> T.Tensor:
    terms = list(fp.action_lp)
    if fp.attention_lp:
        for lp_y, lp_u, b in zip(fp.token_lp, fp.attention_lp, fp.baseline):
            advantage = float(lp_y.data) - b
            # d/dtheta: grad log p(y|u) + (log p(y|u) - b) grad log p(u); the
            # second term has value zero so the loss still reports the NLL.
            terms.append(lp_y)
            terms.append(T.sub(T.scale(lp_u, advantage), float(lp_u.data) * advantage))
    else:
        terms.extend(fp.token_lp)
    return T.scale(T.sum(T.stack(terms)), -1.0)


def reinforce_grads(model, prep, derivation, K=1, rng=None, choices=None) -> dict:
    """Average over K sampled attention paths of the surrogate-loss gradient.

    Dropout is not applied, so the estimate depends only on the sampled
    attention choices. Returns name -> gradient of the loss (minus objective).
    """
    if model.config.attention not in SAMPLED:
        raise ValueError("REINFORCE applies to hard or binomial attention")
    rng = rng if rng is not None else np.random.default_rng()
    acc = {}
    for _ in range(K):
        model.zero_grad()
        fp = teacher_force(model, prep, derivation, rng, training=True, choices=choices)
        surrogate_loss(fp).backward()
        for name, p in model.params.items():
            if p.grad is not None:
                acc[name] = acc.get(name, 0.0) + p.grad / K
    model.zero_grad()
    return {name: acc.get(name, np.zeros_like(p.data)) for name, p in model.params.items()}


# -- training loop ------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    momentum: float = 0.9
    clip_norm: float | None = 5.0
    lr_patience: int = 3      # halve the rate after this many epochs without dev improvement
    eval_every: int = 1
    target_train_em: float | None = None   # stop early once training exact match reaches this
    seed: int = 0


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    skipped: int


def exact_match(model, kb, examples, limits=Limits(), linker=None) -> float:
    if not examples:
        return 0.0
    hits = 0
    for ex in examples:
        cand = greedy_decode(model, kb, ex.words, entity_mask(ex.words, linker), limits)
        hits += print_funql(cand.lf) == print_funql(ex.lf)
    return hits / len(examples)


def train_supervised(model: ParserModel, kb: KnowledgeBase, train, dev=(), config=TrainConfig(),
                     limits=Limits(), linker=None, callback=None) -> TrainResult:
    """Single-example momentum SGD over shuffled epochs.

    Keeps the parameters of the epoch with the best dev exact match; with an
    empty dev set the final parameters are kept. Examples whose oracle
    derivation is ruled out by the masks are skipped with a warning.
    """
    if not train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    opt = MomentumSGD(config.lr, config.momentum, config.clip_norm)
    usable, skipped = [], 0
    for ex in train:
        d = oracle(ex.lf, model.config.mode)
        prep = prepare(model, kb, ex.words, entity_mask(ex.words, linker), limits)
        try:
            with T.no_grad():
                teacher_force(model, prep, d)
        except OracleInadmissible as err:
            log.warning("skipping %r: %s", ex.utterance, err)
            skipped += 1
            continue
        usable.append((ex, d))
    history, best, best_epoch, stall = [], -1.0, 0, 0
    best_snap = None
    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for i in rng.permutation(len(usable)):
            ex, d = usable[i]
            prep = prepare(model, kb, ex.words, entity_mask(ex.words, linker), limits)
            loss = loss_supervised(model, prep, d, rng, training=True)
            loss.backward()
            opt.step(model.params)
            total += float(loss.data)
        row = {"epoch": epoch, "loss": total / max(len(usable), 1), "lr": opt.lr}
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            if dev:
                row["dev_em"] = exact_match(model, kb, dev, limits, linker)
                if row["dev_em"] > best:
                    best, best_epoch, stall, best_snap = row["dev_em"], epoch, 0, model.snapshot()
                else:
                    stall += 1
                    if stall >= config.lr_patience:
                        opt.lr /= 2
                        stall = 0
            if config.target_train_em is not None:
                row["train_em"] = exact_match(model, kb, [ex for ex, _ in usable], limits, linker)
        history.append(row)
        if callback:
            callback(row)
        if config.target_train_em is not None and row.get("train_em", -1) >= config.target_train_em:
            break
    if best_snap is not None:
        model.load_snapshot(best_snap)
    else:
        best_epoch = len(history)
    return TrainResult(history, best_epoch, skipped)
