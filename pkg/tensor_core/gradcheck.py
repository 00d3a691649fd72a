#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Finite-difference verification of analytic gradients.
"""

from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor


def _as_scalar(out: Tensor, projection: np.ndarray) -> Tensor:
    if out.data.size == 1:
        return out
    from . import ops
    return ops.sum(ops.mul(out, projection))


def analytic_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], projection: np.ndarray) -> List[np.ndarray]:
    inputs = [Tensor(a, requires_grad=True, dtype=a.dtype) for a in arrays]
    _as_scalar(fn(*inputs), projection).backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]


def numeric_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], projection: np.ndarray,
                      eps: float) -> List[np.ndarray]:
    grads = []
    for k, base in enumerate(arrays):
        grad = np.zeros_like(base)
        flat = grad.reshape(-1)
        for idx in range(base.size):
            values = []
            for sign in (1.0, -1.0):
                shifted = [a.copy() for a in arrays]
                shifted[k].reshape(-1)[idx] += sign * eps
                out = fn(*[Tensor(a, dtype=a.dtype) for a in shifted])
                values.append(_as_scalar(out, projection).item())
            flat[idx] = (values[0] - values[1]) / (2 * eps)
        grads.append(grad)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), zero when both vanish"""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], eps: float = 1e-6,
                    seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients

    Args:
        fn: Function of Tensors returning a Tensor
        arrays: Input values; their dtype sets the precision of the check
        eps: Finite-difference step
        seed: Seed of the random projection applied to non-scalar outputs

    Returns:
        Largest relative error over all inputs
    """
    arrays = [np.array(a) for a in arrays]
    sample = fn(*[Tensor(a, dtype=a.dtype) for a in arrays])
    projection = np.random.default_rng(seed).standard_normal(sample.shape).astype(sample.dtype)
    analytic = analytic_gradients(fn, arrays, projection)
    numeric = numeric_gradients(fn, arrays, projection, eps)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))
