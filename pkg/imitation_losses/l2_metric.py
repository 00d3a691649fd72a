#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Squared Euclidean imitation metric: sum over channels of (V - Z)^2
"""

from tensor_core import Tensor

from .base import ImitationMetric


class L2Metric(ImitationMetric):

    name = 'l2'

    def loss_map(self, student: Tensor, teacher: Tensor) -> Tensor:
        self.check_shapes(self.name, student, teacher)
        diff = student.data - self._teacher_values(student, teacher)
        out = (diff * diff).sum(axis=1)

        def backward(g):
            return (2 * diff * g[:, None, :, :],)

        return Tensor.from_op(out, (student,), backward, 'l2_imitation')
