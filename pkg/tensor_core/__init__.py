#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Minimal deterministic tensor math with reverse-mode differentiation.

Covers the fixed op set the distillation kit needs: convolution, pooling,
activations, bilinear resize, channel statistics and detection-loss
primitives.
"""

from .tensor import Tensor, no_grad, default_dtype, get_default_dtype, is_grad_enabled, as_tensor
from . import ops
from .ops import (
    add, sub, mul, div, neg, scale, square, relu, sigmoid,
    reshape, transpose, concat, conv2d, maxpool2x2, bilinear_resize,
    channel_stats, softmax_cross_entropy, smooth_l1,
)
from .gradcheck import check_gradients
from .optim import SGD, StepDecay

__all__ = [
    'Tensor', 'no_grad', 'default_dtype', 'get_default_dtype', 'is_grad_enabled', 'as_tensor', 'ops',
    'add', 'sub', 'mul', 'div', 'neg', 'scale', 'square', 'relu', 'sigmoid',
    'reshape', 'transpose', 'concat', 'conv2d', 'maxpool2x2', 'bilinear_resize',
    'channel_stats', 'softmax_cross_entropy', 'smooth_l1',
    'check_gradients', 'SGD', 'StepDecay',
]
