#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Cosine imitation metric: 1 - V.Z / max(|V| |Z|, epsilon)

Only the direction of the student vector is matched. A zero vector on
either side yields loss 1.
"""

import numpy as np

from tensor_core import Tensor

from .base import ImitationMetric

DEFAULT_EPSILON = 1e-8


class CosineMetric(ImitationMetric):

    name = 'cosine'

    def __init__(self, epsilon: float = DEFAULT_EPSILON, **kwargs):
        super().__init__(epsilon=epsilon, **kwargs)
        self.epsilon = epsilon

    def loss_map(self, student: Tensor, teacher: Tensor) -> Tensor:
        self.check_shapes(self.name, student, teacher)
        s = student.data
        t = self._teacher_values(student, teacher)
        dot = (s * t).sum(axis=1)
        norm_s = np.sqrt((s * s).sum(axis=1))
        norm_t = np.sqrt((t * t).sum(axis=1))
        product = norm_s * norm_t
        clamped = product <= self.epsilon
        denom = np.where(clamped, s.dtype.type(self.epsilon), product)
        # rounding can push the ratio just past +-1
        out = np.clip(1 - dot / denom, 0, 2).astype(s.dtype)

        def backward(g):
            # d/ds of dot/(|s||t|) is t/denom - dot * s / (|s|^2 denom); only t/eps when clamped
            safe_sq = np.where(clamped, 1, norm_s * norm_s)
            radial = np.where(clamped, 0, dot / (safe_sq * denom))
            grad = -(t / denom[:, None]) + radial[:, None] * s
            return ((grad * g[:, None]).astype(s.dtype),)

        return Tensor.from_op(out, (student,), backward, 'cosine_imitation')
