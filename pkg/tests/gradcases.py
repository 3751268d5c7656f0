"""Finite-difference cases for each parameterised layer.

Every case builds random shapes and weights from a seed and returns
(loss_fn, tensors to check). The loss is a random projection of the layer
output so that every output coordinate matters.
"""
from __future__ import annotations

import numpy as np

from tsparser import attention as att
from tsparser.neural import tensor as T
from tsparser.neural.layers import LSTMParams, compose, lstm_step


def _p(rng, *shape, scale=0.5):
    return T.param(rng.normal(scale=scale, size=shape))


def _project(rng, out):
    r = rng.normal(size=out.shape)
    return T.sum(T.mul(out, r))


def lstm_case(seed):
    rng = np.random.default_rng(seed)
    n_in, H = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    cell = LSTMParams(_p(rng, 4 * H, H + n_in), _p(rng, 4 * H), _p(rng, H), _p(rng, H))
    x, h, c = _p(rng, n_in), _p(rng, H), _p(rng, H)
    r1, r2 = rng.normal(size=H), rng.normal(size=H)

    def loss():
        h1, c1 = lstm_step(x, h, c, cell)
        h2, c2 = lstm_step(x, h1, c1, cell)  # two steps exercise the recurrence
        return T.add(T.sum(T.mul(h2, r1)), T.sum(T.mul(c2, r2)))
    return loss, {"W": cell.W, "b": cell.b, "x": x, "h": h, "c": c}


def compose_case(seed):
    rng = np.random.default_rng(seed)
    d, n = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    W_u, parent = _p(rng, d, 2 * d), _p(rng, d)
    kids = [_p(rng, d) for _ in range(n)]
    r = rng.normal(size=d)

    def loss():
        return T.sum(T.mul(T.tanh(compose(parent, kids, W_u)), r))
    return loss, {"W_u": W_u, "parent": parent, **{f"child{i}": k for i, k in enumerate(kids)}}


def scorer_case(seed):
    rng = np.random.default_rng(seed)
    k, H, A = int(rng.integers(1, 6)), int(rng.integers(2, 5)), int(rng.integers(2, 5))
    params = att.ScorerParams(_p(rng, A, 2 * H), _p(rng, A, H), _p(rng, A))
    buf, s = _p(rng, k, 2 * H), _p(rng, H)
    r = rng.normal(size=2 * H)

    def loss():
        u = att.score(buf, s, params)
        return T.sum(T.mul(att.soft_attend(u, buf), r))
    return loss, {"W_b": params.W_b, "W_s": params.W_s, "V": params.V, "buffer": buf, "s": s}


def output_case(seed):
    rng = np.random.default_rng(seed)
    H, F, n = int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(2, 7))
    W_f, b_f = _p(rng, F, 3 * H), _p(rng, F)
    W_o, b_o = _p(rng, n, F), _p(rng, n)
    ctx, s = _p(rng, 2 * H), _p(rng, H)
    mask = rng.random(n) < 0.7
    mask[rng.integers(n)] = True
    target = int(rng.choice(np.flatnonzero(mask)))

    def loss():
        f = att.features(ctx, s, W_f, b_f)
        return T.getitem(att.masked_log_probs(f, W_o, b_o, mask), target)
    return loss, {"W_f": W_f, "b_f": b_f, "W_o": W_o, "b_o": b_o, "context": ctx, "s": s}


def crf_case(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 8))
    u, w = _p(rng, k, scale=1.0), _p(rng, 3, scale=1.0)
    r = rng.normal(size=k)

    def loss():
        return T.sum(T.mul(att.crf_marginals(u, w), r))
    return loss, {"scores": u, "w": w}


LAYERS = {
    "recurrent cell": lstm_case,
    "composition": compose_case,
    "attention scorer": scorer_case,
    "output projections": output_case,
    "CRF chain": crf_case,
}
