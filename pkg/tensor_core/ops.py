#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Differentiable ops of the kit.

Every op is a pure function of its inputs: a numpy forward pass plus an
analytic backward pass. Reductions run in numpy's fixed row-major order so
repeated calls give bit-identical results.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor

Operand = Union[Tensor, float, int, np.ndarray]


def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not compatible") from None


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward, 'add')


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'sub')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward, 'sub')


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'mul')

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward, 'mul')


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'div')

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return Tensor.from_op(a.data / b.data, (a, b), backward, 'div')


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,), 'neg')


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python scalar"""
    factor = a.dtype.type(factor)
    return Tensor.from_op(a.data * factor, (a,), lambda g: (g * factor,), 'scale')


def square(a: Tensor) -> Tensor:
    return Tensor.from_op(a.data * a.data, (a,), lambda g: (2 * a.data * g,), 'square')


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor.from_op(np.where(mask, a.data, 0).astype(a.dtype), (a,),
                          lambda g: (g * mask,), 'relu')


def sigmoid_values(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1 / (1 + z), z / (1 + z)).astype(x.dtype)


def sigmoid(a: Tensor) -> Tensor:
    s = sigmoid_values(a.data)
    return Tensor.from_op(s, (a,), lambda g: (g * s * (1 - s),), 'sigmoid')


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return Tensor.from_op(np.asarray(out, dtype=a.dtype), (a,), backward, 'sum')


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view shape {a.shape} as {tuple(shape)}") from None
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    inverse = np.argsort(axes)
    return Tensor.from_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), 'transpose')


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor.from_op(out, tuple(tensors), backward, 'concat')


# ---------------------------------------------------------------------------
# Convolution, pooling, resize
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of an NCHW input with an OIKK kernel

    Args:
        x: Input, shape (N, C, H, W)
        kernel: Kernel, shape (O, C, KH, KW)
        bias: Optional per-output-channel bias, shape (O,)
        stride: Step between windows, >= 1
        pad: Zero padding on each spatial side, >= 0

    Returns:
        Tensor of shape (N, O, (H + 2p - KH) // s + 1, (W + 2p - KW) // s + 1)

    Raises:
        DimensionError: If the kernel channel count differs from the input's
    """
    if x.ndim != 4 or kernel.ndim != 4 or kernel.shape[1] != x.shape[1]:
        raise DimensionError(f"conv2d: input shape {x.shape} does not match kernel shape {kernel.shape}")
    if stride < 1 or pad < 0:
        raise DimensionError(f"conv2d: stride must be >= 1 and pad >= 0, got stride={stride}, pad={pad}")
    n, c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (w + 2 * pad - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"conv2d: kernel {kernel.shape} larger than padded input {x.shape}")

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :out_h, :out_w]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * kh * kw)
    weights = kernel.data.reshape(o, c * kh * kw)
    out = (cols @ weights.T).reshape(n, out_h, out_w, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)
    out = np.ascontiguousarray(out, dtype=x.dtype)

    def backward(g):
        g_mat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        grad_kernel = (g_mat.T @ cols).reshape(kernel.shape)
        grad_cols = (g_mat @ weights).reshape(n, out_h, out_w, c, kh, kw)
        grad_padded = np.zeros(padded.shape, dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride] += \
                    grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, pad:pad + h, pad:pad + w]
        grads = (grad_x, grad_kernel)
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(out, parents, backward, 'conv2d')


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped

    Ties resolve to the first maximum in row-major window order.
    """
    if x.ndim != 4:
        raise DimensionError(f"maxpool2x2: expected NCHW input, got shape {x.shape}")
    n, c, h, w = x.shape
    out_h, out_w = h // 2, w // 2
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"maxpool2x2: input {x.shape} smaller than the window")
    cropped = x.data[:, :, :out_h * 2, :out_w * 2]
    windows = cropped.reshape(n, c, out_h, 2, out_w, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, out_h, out_w, 4)
    index = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, index, axis=-1)[..., 0]

    def backward(g):
        grad_windows = np.zeros(windows.shape, dtype=x.dtype)
        np.put_along_axis(grad_windows, index, g[..., None], axis=-1)
        grad = grad_windows.reshape(n, c, out_h, out_w, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, out_h * 2, out_w * 2)
        if grad.shape != x.shape:
            grad = np.pad(grad, ((0, 0), (0, 0), (0, h - out_h * 2), (0, w - out_w * 2)))
        return (grad,)

    return Tensor.from_op(np.ascontiguousarray(out), (x,), backward, 'maxpool2x2')


def interpolation_matrix(in_size: int, out_size: int) -> np.ndarray:
    """Row-stochastic matrix of 1-D linear interpolation (align-corners false)

    Source coordinate of output index i is (i + 0.5) * in/out - 0.5, clamped
    to [0, in - 1].
    """
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lower = np.floor(src).astype(np.int64)
    upper = np.minimum(lower + 1, in_size - 1)
    frac = src - lower
    matrix = np.zeros((out_size, in_size), dtype=np.float64)
    rows = np.arange(out_size)
    np.add.at(matrix, (rows, lower), 1.0 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of an NCHW tensor to out_h x out_w"""
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"bilinear_resize: output size must be >= 1, got {out_h}x{out_w}")
    if x.ndim != 4:
        raise DimensionError(f"bilinear_resize: expected NCHW input, got shape {x.shape}")
    rows = interpolation_matrix(x.shape[2], out_h).astype(x.dtype)
    cols = interpolation_matrix(x.shape[3], out_w).astype(x.dtype)
    out = rows @ (x.data @ cols.T)

    def backward(g):
        return ((rows.T @ g) @ cols,)

    return Tensor.from_op(out, (x,), backward, 'bilinear_resize')


def channel_stats(feature: Tensor, mode: str) -> Tensor:
    """Per-location mean or population variance over the channel axis

    Returns:
        Tensor of shape (N, 1, H, W)
    """
    if feature.ndim != 4 or feature.shape[1] < 1:
        raise DimensionError(f"channel_stats: expected NCHW input with C >= 1, got shape {feature.shape}")
    channels = feature.shape[1]
    mu = feature.data.mean(axis=1, keepdims=True)
    if mode == 'mean':
        return Tensor.from_op(mu, (feature,),
                              lambda g: (np.broadcast_to(g / channels, feature.shape).astype(feature.dtype),),
                              'channel_mean')
    if mode == 'variance':
        centered = feature.data - mu
        var = (centered * centered).mean(axis=1, keepdims=True)
        return Tensor.from_op(var, (feature,), lambda g: (g * 2 * centered / channels,), 'channel_variance')
    raise ConfigError(f"channel_stats: unknown mode '{mode}', expected 'mean' or 'variance'")


# ---------------------------------------------------------------------------
# Detection-loss primitives
# ---------------------------------------------------------------------------

def cross_entropy_values(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row softmax cross-entropy on plain arrays (used for negative mining)"""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    picked = np.take_along_axis(shifted, labels[..., None], axis=-1)[..., 0]
    return log_norm - picked


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Per-row softmax cross-entropy of (M, K) logits against class indices

    Returns:
        Tensor of shape (M,)
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != logits.shape[:1]:
        raise DimensionError(f"softmax_cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DimensionError(f"softmax_cross_entropy: labels outside [0, {logits.shape[1]})")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    norm = exp.sum(axis=-1, keepdims=True)
    probs = exp / norm
    rows = np.arange(labels.shape[0])
    loss = np.log(norm[:, 0]) - shifted[rows, labels]

    def backward(g):
        grad = probs.copy()
        grad[rows, labels] -= 1
        return (grad * g[:, None],)

    return Tensor.from_op(loss.astype(logits.dtype), (logits,), backward, 'softmax_cross_entropy')


def smooth_l1(pred: Tensor, target: Operand) -> Tensor:
    """Elementwise smooth L1 with threshold 1: 0.5 d^2 inside, |d| - 0.5 outside"""
    pred, target = _pair(pred, target)
    if pred.shape != target.shape:
        raise DimensionError(f"smooth_l1: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    inside = np.abs(diff) < 1.0
    out = np.where(inside, 0.5 * diff * diff, np.abs(diff) - 0.5).astype(pred.dtype)
    slope = np.where(inside, diff, np.sign(diff)).astype(pred.dtype)
    return Tensor.from_op(out, (pred, target), lambda g: (g * slope, -g * slope), 'smooth_l1')
