#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Abstract base class of imitation metrics

A metric compares the student and teacher channel vector at every spatial
location. The teacher side is a constant: gradients flow to the student only.
"""

from abc import ABC, abstractmethod

import numpy as np

from errors import DimensionError
from tensor_core import Tensor, as_tensor, reshape


class ImitationMetric(ABC):
    """Per-location distance between student and teacher features

    Subclasses implement loss_map with a fused analytic backward.
    """

    name = 'base'

    def __init__(self, **kwargs):
        self.config = kwargs

    @abstractmethod
    def loss_map(self, student: Tensor, teacher: Tensor) -> Tensor:
        """Per-location loss

        Args:
            student: Adapted student feature, shape (N, C, H, W)
            teacher: Teacher feature of the same shape

        Returns:
            Tensor of shape (N, H, W)
        """

    def vector_loss(self, v, z) -> Tensor:
        """Loss between two single channel vectors

        Raises:
            DimensionError: On a length mismatch
        """
        v, z = as_tensor(v), as_tensor(z)
        if v.ndim != 1 or v.shape != z.shape:
            raise DimensionError(f"{self.name}: vectors of shapes {v.shape} and {z.shape} differ")
        c = v.shape[0]
        loss = self.loss_map(reshape(v, (1, c, 1, 1)), reshape(z, (1, c, 1, 1)))
        return reshape(loss, ())

    @staticmethod
    def check_shapes(name: str, student: Tensor, teacher: Tensor):
        if student.ndim != 4 or student.shape != teacher.shape:
            raise DimensionError(f"{name}: student shape {student.shape} does not match teacher shape {teacher.shape}")

    @staticmethod
    def _teacher_values(student: Tensor, teacher: Tensor) -> np.ndarray:
        return teacher.data.astype(student.dtype, copy=False)
