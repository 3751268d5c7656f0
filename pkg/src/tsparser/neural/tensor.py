"""A small dynamic-tape reverse-mode autodiff over numpy arrays.

Every op records its parents and a closure that maps the output gradient to
parent gradients. ``backward`` walks the graph in reverse topological order.
Ops broadcast like numpy; gradients are summed back to the parent shapes.
Inside ``no_grad()`` nothing is recorded, which is what inference uses.
"""
from __future__ import annotations

import contextlib

import numpy as np

DTYPE = np.float64
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}{', param' if self.requires_grad and not self._parents else ''})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:  # leaf
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)


def param(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),))


def log_sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = -np.logaddexp(0.0, -x.data)
    return _make(y, (x,), lambda g: (g * _sigmoid(-x.data),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def logaddexp(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    y = np.logaddexp(a.data, b.data)

    def back(g):
        return (_unbroadcast(g * np.exp(a.data - y), a.shape),
                _unbroadcast(g * np.exp(b.data - y), b.shape))
    return _make(y, (a, b), back)


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    return _make(x.data * c, (x,), lambda g: (g * c,))


# -- shape ---------------------------------------------------------------------

def getitem(x, idx) -> Tensor:
    x = as_tensor(x)
    fancy = any(isinstance(i, (list, np.ndarray)) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def back(g):
        out = np.zeros_like(x.data)
        if fancy:
            np.add.at(out, idx, g)
        else:
            out[idx] += g
        return (out,)
    return _make(x.data[idx], (x,), back)


def concat(xs, axis=-1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    data = np.concatenate([x.data for x in xs], axis=axis)
    sizes = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))
    return _make(data, tuple(xs), back)


def stack(xs, axis=0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    data = np.stack([x.data for x in xs], axis=axis)

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))
    return _make(data, tuple(xs), back)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


# -- reductions ---------------------------------------------------------------

def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    y = x.data.sum(axis=axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)
    return _make(y, (x,), back)


def mean_of(xs) -> Tensor:
    """Elementwise mean of a list of same-shaped tensors."""
    xs = [as_tensor(x) for x in xs]
    n = len(xs)
    data = np.mean([x.data for x in xs], axis=0)
    return _make(data, tuple(xs), lambda g: tuple(g / n for _ in xs))


def logsumexp(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.log(np.sum(np.exp(x.data - m), axis=axis, keepdims=True)) + m
    y = np.squeeze(s, axis=axis)

    def back(g):
        return (np.expand_dims(g, axis) * np.exp(x.data - s),)
    return _make(y, (x,), back)


def log_softmax(x, mask=None) -> Tensor:
    """Log-softmax over the last axis; masked-out entries get -inf and no gradient."""
    x = as_tensor(x)
    z = x.data if mask is None else np.where(mask, x.data, -np.inf)
    m = np.max(z, axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z - m), axis=-1, keepdims=True)) + m
    y = z - lse
    p = np.exp(y)

    def back(g):
        gm = g if mask is None else np.where(mask, g, 0.0)
        return (gm - p * gm.sum(axis=-1, keepdims=True),)
    return _make(y, (x,), back)


def softmax(x, axis=-1) -> Tensor:
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
    return _make(y, (x,), back)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b) -> Tensor:
    """``a @ b`` for b of rank 1 or 2 and a of any rank >= 1."""
    a, b = as_tensor(a), as_tensor(b)
    y = a.data @ b.data

    def back(g):
        if b.ndim == 1:
            ga = np.multiply.outer(g, b.data)
            gb = np.tensordot(g, a.data, axes=(tuple(range(g.ndim)), tuple(range(a.ndim - 1))))
        elif a.ndim == 1:
            ga = g @ b.data.T
            gb = np.outer(a.data, g)
        else:
            ga = g @ b.data.T
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb
    return _make(y, (a, b), back)


def linear(x, W, b=None) -> Tensor:
    """``x @ W.T + b`` with W of shape (out, in)."""
    x, W = as_tensor(x), as_tensor(W)
    y = x.data @ W.data.T
    if b is not None:
        b = as_tensor(b)
        y = y + b.data

    def back(g):
        gx = g @ W.data
        gW = g.reshape(-1, g.shape[-1]).T @ x.data.reshape(-1, x.shape[-1])
        if b is None:
            return gx, gW
        return gx, gW, g.reshape(-1, g.shape[-1]).sum(axis=0)
    return _make(y, (x, W) if b is None else (x, W, b), back)


def lstm_cell(x, h, c, W, bias):
    """One LSTM step; W maps [h, x] to the stacked i, f, o, candidate pre-activations.

    Returns (h_new, c_new). Batched over leading axes.
    """
    x, h, c, W, bias = (as_tensor(t) for t in (x, h, c, W, bias))
    H = h.shape[-1]
    hx = np.concatenate([np.broadcast_to(h.data, x.shape[:-1] + (H,)), x.data], axis=-1)
    z = hx @ W.data.T + bias.data
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H:2 * H])
    o = _sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c_new = f * c.data + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def grads(gh, gc):
        gc_total = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            gc_total * g * i * (1.0 - i),
            gc_total * c.data * f * (1.0 - f),
            gh * tc * o * (1.0 - o),
            gc_total * i * (1.0 - g * g)], axis=-1)
        dhx = dz @ W.data
        dW = dz.reshape(-1, dz.shape[-1]).T @ hx.reshape(-1, hx.shape[-1])
        db = dz.reshape(-1, dz.shape[-1]).sum(axis=0)
        dh = _unbroadcast(dhx[..., :H], h.shape)
        dx = dhx[..., H:]
        dc = _unbroadcast(gc_total * f, c.shape)
        return dx, dh, dc, dW, db

    parents = (x, h, c, W, bias)
    if not (_grad_enabled and any(p.requires_grad for p in parents)):
        return Tensor(h_new), Tensor(c_new)

    # The pair of outputs is realised as a joint node plus two views of it.
    joint = _make(np.concatenate([h_new, c_new], axis=-1), parents,
                  lambda gj: grads(gj[..., :H], gj[..., H:]))
    return getitem(joint, (..., slice(0, H))), getitem(joint, (..., slice(H, 2 * H)))


def dropout(x, rate: float, rng, training=True) -> Tensor:
    """Inverted dropout: E[output] == input."""
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)
