"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np


def numerical_grad(f, x: np.ndarray, eps=1e-5, indices=None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    idx = indices if indices is not None else list(np.ndindex(x.shape))
    for i in idx:
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def relative_error(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8))


def check_tensor_grads(loss_fn, tensors: dict, eps=1e-5, max_entries=40, rng=None) -> dict:
    """Compare tape gradients of ``loss_fn()`` with finite differences.

    Returns name -> relative error. At most ``max_entries`` randomly chosen
    coordinates per tensor are probed.
    """
    rng = rng or np.random.default_rng(0)
    for t in tensors.values():
        t.grad = None
    loss = loss_fn()
    loss.backward()
    errors = {}
    for name, t in tensors.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        all_idx = list(np.ndindex(t.data.shape))
        if len(all_idx) > max_entries:
            pick = rng.choice(len(all_idx), size=max_entries, replace=False)
            all_idx = [all_idx[i] for i in pick]
        num = numerical_grad(lambda: float(loss_fn().data), t.data, eps, all_idx)
        a = np.array([analytic[i] for i in all_idx])
        n = np.array([num[i] for i in all_idx])
        errors[name] = relative_error(a, n)
    for t in tensors.values():
        t.grad = None
    return errors
