#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tensor with reverse-mode differentiation.

A Tensor wraps a numpy array. Every op output remembers its parents (in
order) and a backward closure that maps the upstream gradient to one
gradient per parent. ``Tensor.backward`` walks the graph in reverse
topological order and accumulates gradients into leaf tensors.
"""

import os
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError, NonFiniteError

_state = threading.local()

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _get(name: str, default):
    return getattr(_state, name, default)


def is_grad_enabled() -> bool:
    """Whether op outputs currently record the graph"""
    return _get('grad_enabled', True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (teacher forward, evaluation)"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def get_default_dtype():
    return _get('dtype', np.float32)


@contextmanager
def default_dtype(dtype):
    """Select the dtype of newly created tensors (float64 for gradient checks)"""
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _state.dtype = previous


def check_finite_enabled() -> bool:
    """HGD_CHECK_FINITE=1 turns on per-op finiteness assertions"""
    return os.getenv('HGD_CHECK_FINITE', '0') == '1'


class Tensor:
    """Dense N-dimensional array with optional gradient tracking

    Features use NCHW order. Tensors produced by ops are read-only.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_parents', '_backward', '_op')

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == 'f' else get_default_dtype()
        self.data = np.array(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = 'leaf'

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence['Tensor'], backward: BackwardFn, op: str) -> 'Tensor':
        """Build an op output and record the graph edge when needed"""
        out = cls.__new__(cls)
        out.data = np.asarray(data)
        if check_finite_enabled() and not np.all(np.isfinite(out.data)):
            raise NonFiniteError(f"op '{op}' produced non-finite values")
        out.data.flags.writeable = False
        out.grad = None
        out.name = None
        out._op = op
        track = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        """Same values, cut from the graph"""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None):
        """Accumulate gradients of this tensor into every reachable leaf

        Args:
            grad: Upstream gradient, defaults to ones for single-element tensors
        """
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() without grad needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return
        pending = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(_topological_order(self)):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node._backward is None:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, op={self._op}, requires_grad={self.requires_grad})"

    # Operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.neg(self)


def _topological_order(root: Tensor):
    """Parents-before-children order of the tracked graph below root"""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants, matching the dtype of ``like`` when given"""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)
