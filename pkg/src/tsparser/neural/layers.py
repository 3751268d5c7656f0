"""Recurrent building blocks: LSTM cells, the bidirectional utterance encoder
and the stack-structured encoder of the partial tree."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ShapeMismatch(ValueError):
    pass


class EmptyUtterance(ValueError):
    pass


class StackUnderflow(IndexError):
    pass


def uniform(rng, shape, scale=0.08):
    return rng.uniform(-scale, scale, size=shape)


@dataclass
class LSTMParams:
    W: Tensor      # (4H, H + input)
    b: Tensor      # (4H,)  gate order: input, forget, output, candidate
    h0: Tensor     # learned initial state
    c0: Tensor

    @classmethod
    def init(cls, rng, input_size, hidden, prefix="", scale=0.08):
        return cls(T.param(uniform(rng, (4 * hidden, hidden + input_size), scale), prefix + "W"),
                   T.param(uniform(rng, (4 * hidden,), scale), prefix + "b"),
                   T.param(uniform(rng, (hidden,), scale), prefix + "h0"),
                   T.param(uniform(rng, (hidden,), scale), prefix + "c0"))

    @property
    def hidden(self):
        return self.h0.shape[0]

    @property
    def input_size(self):
        return self.W.shape[1] - self.hidden

    def named(self, prefix):
        return {prefix + "W": self.W, prefix + "b": self.b, prefix + "h0": self.h0, prefix + "c0": self.c0}


def lstm_step(x, h_prev, c_prev, cell: LSTMParams):
    if T.as_tensor(x).shape[-1] != cell.input_size or T.as_tensor(h_prev).shape[-1] != cell.hidden:
        raise ShapeMismatch(f"lstm_step: input {T.as_tensor(x).shape} / state {T.as_tensor(h_prev).shape} "
                            f"do not fit a cell with input {cell.input_size} and hidden {cell.hidden}")
    return T.lstm_cell(x, h_prev, c_prev, cell.W, cell.b)


def run_lstm(xs, cell: LSTMParams) -> list:
    h, c = cell.h0, cell.c0
    out = []
    for x in xs:
        h, c = T.lstm_cell(x, h, c, cell.W, cell.b)
        out.append(h)
    return out


def encode_utterance(word_ids, word_emb: Tensor, fwd: LSTMParams, bwd: LSTMParams) -> Tensor:
    """Buffer of shape (k, 2H): row i is forward state i followed by backward state i."""
    word_ids = list(word_ids)
    if not word_ids:
        raise EmptyUtterance("cannot encode an empty utterance")
    xs = T.getitem(word_emb, np.asarray(word_ids))
    rows = [T.getitem(xs, i) for i in range(len(word_ids))]
    forward = run_lstm(rows, fwd)
    backward = run_lstm(rows[::-1], bwd)[::-1]
    return T.concat([T.stack(forward), T.stack(backward)], axis=-1)


# -- stack encoder ----------------------------------------------------------

class StackNode:
    """One entry of the stack-LSTM: the recurrent state after pushing ``emb``.

    Nodes are immutable and linked to the node below, so pushing creates a new
    node and popping is just following ``below``; earlier states are never
    modified.
    """

    __slots__ = ("h", "c", "emb", "is_open", "below", "height")

    def __init__(self, h, c, emb=None, is_open=False, below=None):
        self.h = h
        self.c = c
        self.emb = emb
        self.is_open = is_open
        self.below = below
        self.height = 0 if below is None else below.height + 1

    def fragments(self) -> list:
        out, n = [], self
        while n.below is not None:
            out.append(n)
            n = n.below
        return out[::-1]


def stack_init(cell: LSTMParams) -> StackNode:
    return StackNode(cell.h0, cell.c0)


def stack_push(node: StackNode, y, cell: LSTMParams, is_open=False) -> StackNode:
    h, c = lstm_step(y, node.h, node.c, cell)
    return StackNode(h, c, y, is_open, node)


def compose(parent_emb, child_embs, W_u: Tensor) -> Tensor:
    """Subtree embedding W_u . [parent ; mean(children)]."""
    child = child_embs[0] if len(child_embs) == 1 else T.mean_of(child_embs)
    return T.linear(T.concat([parent_emb, child]), W_u)


def stack_reduce(node: StackNode, mode: str, W_u: Tensor, cell: LSTMParams,
                 parent_emb=None, n_children: Optional[int] = None) -> StackNode:
    """Pop the children of the subtree being closed and push its composition.

    Top-down pops until an open nonterminal (which is popped too and supplies
    the parent embedding); bottom-up pops ``n_children`` entries and takes the
    parent embedding from the caller, since the nonterminal is never pushed alone.
    """
    kids = []
    n = node
    if mode == "td":
        while n.below is not None and not n.is_open:
            kids.append(n.emb)
            n = n.below
        if n.below is None:
            raise StackUnderflow("no open nonterminal to reduce")
        if not kids:
            raise StackUnderflow("open nonterminal has no children")
        parent_emb = n.emb if parent_emb is None else parent_emb
        n = n.below
    else:
        if n_children is None or parent_emb is None:
            raise ValueError("bottom-up reduce needs the parent embedding and child count")
        for _ in range(n_children):
            if n.below is None:
                raise StackUnderflow(f"need {n_children} fragments, stack has {node.height}")
            kids.append(n.emb)
            n = n.below
    u = compose(parent_emb, kids[::-1], W_u)
    return stack_push(n, u, cell)
