"""Attention over the utterance buffer.

All functions take tape tensors and work on a trailing token axis, so the
same code scores one parser state of shape (H,) during training or a batch of
beam hypotheses of shape (B, H) during decoding.

Variants for token prediction:

* ``soft``       softmax-weighted average of buffer vectors
* ``structured`` weights are marginals p(A_i = 1) of a binary linear-chain CRF
* ``hard``       a single buffer token, sampled in training and argmax at inference
* ``binomial``   independent per-token selection, averaged over the selected tokens
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .neural import tensor as T
from .neural.tensor import Tensor

VARIANTS = ("soft", "structured", "hard", "binomial")


class EmptyMask(ValueError):
    pass


@dataclass
class ScorerParams:
    """Shared by action and token prediction: u_i = V . tanh(W_b b_i + W_s s)."""

    W_b: Tensor  # (A, 2H)
    W_s: Tensor  # (A, H)
    V: Tensor    # (A,)


def project_buffer(buffer, params: ScorerParams) -> Tensor:
    return T.linear(buffer, params.W_b)


def score(buffer, s, params: ScorerParams, projected=None) -> Tensor:
    """Attention logits over buffer positions; shape s.shape[:-1] + (k,)."""
    proj = project_buffer(buffer, params) if projected is None else projected
    ws = T.linear(s, params.W_s)
    if ws.ndim == 2:  # batch of states: (B, 1, A) against (k, A)
        ws = T.reshape(ws, (ws.shape[0], 1, ws.shape[1]))
    return T.matmul(T.tanh(T.add(proj, ws)), params.V)


def soft_weights(scores) -> Tensor:
    return T.softmax(scores, axis=-1)


def soft_attend(scores, buffer) -> Tensor:
    return T.matmul(soft_weights(scores), buffer)


# -- structured attention -----------------------------------------------------------

def crf_marginals(scores, w) -> Tensor:
    """Marginals p(A_i = 1) of a chain over binary labels A_1..A_k.

    The unnormalised log-score of a labelling is
    sum_i [w0 u_i A_i + w1 A_{i-1} A_i + w2 u_i A_{i-1} A_i] with A_0 = 0.
    Forward and backward messages are kept in log space; each marginal is
    normalised by the partition function.
    """
    scores, w = T.as_tensor(scores), T.as_tensor(w)
    k = scores.shape[-1]
    u = [T.getitem(scores, (..., i)) for i in range(k)]
    w_state, w_trans, w_ctx = (T.getitem(w, j) for j in range(3))
    on = [T.mul(w_state, ui) for ui in u]                                   # log psi(., 1) for A_{i-1} = 0
    on_on = [T.add(on[i], T.add(w_trans, T.mul(w_ctx, u[i]))) for i in range(k)]  # A_{i-1} = 1

    zero = T.Tensor(np.zeros(scores.shape[:-1]))
    fwd0, fwd1 = [zero], [on[0]]
    for i in range(1, k):
        fwd0.append(T.logaddexp(fwd0[-1], fwd1[-1]))
        fwd1.append(T.logaddexp(T.add(fwd0[-2], on[i]), T.add(fwd1[-1], on_on[i])))
    bwd0, bwd1 = [zero], [zero]
    for i in range(k - 2, -1, -1):
        nb0, nb1 = bwd0[0], bwd1[0]
        bwd0.insert(0, T.logaddexp(nb0, T.add(on[i + 1], nb1)))
        bwd1.insert(0, T.logaddexp(nb0, T.add(on_on[i + 1], nb1)))
    log_z = T.logaddexp(fwd0[-1], fwd1[-1])
    marg = [T.exp(T.sub(T.add(fwd1[i], bwd1[i]), log_z)) for i in range(k)]
    return T.stack(marg, axis=-1)


def structured_attend(marginals, buffer) -> Tensor:
    """Marginal-weighted sum of buffer vectors; weights are not renormalised across positions."""
    return T.matmul(marginals, buffer)


# -- hard attention -------------------------------------------------------------------

def hard_sample(scores, rng=None):
    """Pick one buffer position.

    With ``rng`` the index is sampled from softmax(scores); without it the
    argmax is taken. Returns (index, log-probability tensor of that index).
    """
    scores = T.as_tensor(scores)
    logp = T.log_softmax(scores)
    if rng is None:
        idx = int(np.argmax(scores.data))
    else:
        p = np.exp(logp.data)
        idx = int(rng.choice(len(p), p=p / p.sum()))
    return idx, T.getitem(logp, idx)


def binomial_select(scores, buffer, rng=None):
    """Independent per-token selection with p(A_i = 1) = logistic(u_i).

    Training (``rng`` given) samples the mask; inference keeps tokens whose
    probability is strictly above 0.5. An empty selection falls back to the
    single highest-scoring token. Returns (mask, averaged buffer vector,
    log-probability of the sampled mask).
    """
    scores = T.as_tensor(scores)
    if rng is None:
        mask = scores.data > 0.0
    else:
        mask = rng.random(scores.shape) < T._sigmoid(scores.data)
    log_p = T.sum(T.add(T.mul(T.log_sigmoid(scores), mask.astype(float)),
                        T.mul(T.log_sigmoid(T.scale(scores, -1.0)), (~mask).astype(float))))
    chosen = mask.copy()
    if not chosen.any():
        chosen[int(np.argmax(scores.data))] = True
    weights = chosen.astype(float) / chosen.sum()
    return mask, T.matmul(T.Tensor(weights), buffer), log_p


def binomial_context_batch(scores: np.ndarray, buffer: np.ndarray) -> np.ndarray:
    """Inference-time binomial context for a batch of score rows (no tape)."""
    chosen = scores > 0.0
    empty = ~chosen.any(axis=-1)
    if empty.any():
        chosen[empty, np.argmax(scores[empty], axis=-1)] = True
    weights = chosen / chosen.sum(axis=-1, keepdims=True)
    return weights @ buffer


# -- output layers ------------------------------------------------------------------

def features(context, s, W_f, b_f) -> Tensor:
    """Combined buffer/stack representation tanh(W_f [context ; s] + b_f)."""
    return T.tanh(T.linear(T.concat([context, s], axis=-1), W_f, b_f))


def masked_log_probs(feature, W_out, b_out, mask) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise EmptyMask("no admissible outcome")
    return T.log_softmax(T.linear(feature, W_out, b_out), mask)


def predict_token(feature, W_oy, b_oy, vocab_mask) -> Tensor:
    """Log-distribution over logical tokens with inadmissible tokens at -inf."""
    return masked_log_probs(feature, W_oy, b_oy, vocab_mask)


# -- traces ---------------------------------------------------------------------------

def trace_line(words, step, op, token, variant, weights) -> str:
    """One JSON-lines record of attention weights (or a 0/1 mask) for one decoding step."""
    return json.dumps({"step": step, "op": str(op), "token": token, "variant": variant,
                       "weights": [[w, round(float(a), 6)] for w, a in zip(words, weights)]})
