#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SGD with momentum and a step-decay learning-rate schedule.
"""

from typing import Dict, List, Sequence

import numpy as np

from errors import ConfigError
from .tensor import Tensor


class SGD:
    """Momentum SGD over named parameters

    Parameters are replaced with new arrays on every step, never mutated,
    so tensors handed out earlier keep their values.
    """

    def __init__(self, parameters: Dict[str, Tensor], momentum: float = 0.9, weight_decay: float = 0.0):
        self.parameters = parameters
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity = {name: np.zeros_like(p.data) for name, p in parameters.items()}

    def step(self, lr: float):
        for name, param in self.parameters.items():
            if param.grad is None:
                continue
            grad = param.grad
            if self.weight_decay:
                grad = grad + self.weight_decay * param.data
            velocity = self.momentum * self._velocity[name] + grad
            self._velocity[name] = velocity
            param.data = (param.data - lr * velocity).astype(param.data.dtype)

    def zero_grad(self):
        for param in self.parameters.values():
            param.grad = None


class StepDecay:
    """Multiply the base learning rate by ``factor`` at each milestone epoch"""

    def __init__(self, base_lr: float, factor: float, milestones: Sequence[int]):
        milestones = list(milestones)
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ConfigError(f"LR milestones must be strictly increasing, got {milestones}")
        self.base_lr = base_lr
        self.factor = factor
        self.milestones: List[int] = milestones

    def lr_at(self, epoch: int) -> float:
        passed = sum(1 for m in self.milestones if epoch >= m)
        return self.base_lr * self.factor ** passed
