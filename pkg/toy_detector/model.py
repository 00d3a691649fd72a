#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Toy single-shot detector built on tensor_core.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from errors import CheckpointError, DimensionError
from tensor_core import Tensor, as_tensor, concat, conv2d, maxpool2x2, relu, reshape, transpose

from .spec import DetectorSpec

logger = logging.getLogger(__name__)


@dataclass
class DetectionOutput:
    """Head outputs for a batch

    logits: (N, A, num_classes + 1), class 0 is background
    offsets: (N, A, 4) dx, dy, dw, dh
    """
    logits: Tensor
    offsets: Tensor

    def __post_init__(self):
        if self.logits.shape[:2] != self.offsets.shape[:2]:
            raise DimensionError(f"logits {self.logits.shape} and offsets {self.offsets.shape} disagree on anchor count")

    @property
    def num_anchors(self) -> int:
        return self.logits.shape[1]


class DetectorModel:
    """Stages of (maxpool, (conv3x3 + relu) x blocks) with per-stage heads

    Args:
        spec: Architecture
        seed: Seed of the parameter initialization
    """

    def __init__(self, spec: DetectorSpec, seed: int = 0):
        self.spec = spec
        self.params: Dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        in_channels = spec.in_channels
        for stage, width in enumerate(spec.widths):
            for block in range(spec.blocks_per_stage):
                std = np.sqrt(2.0 / (in_channels * 9))
                self._add(f"stage{stage}.conv{block}.weight", rng.normal(0.0, std, (width, in_channels, 3, 3)))
                self._add(f"stage{stage}.conv{block}.bias", np.zeros(width))
                in_channels = width
        for stage in spec.head_stages:
            width = spec.widths[stage]
            for head, outputs in (('cls', spec.num_classes + 1), ('loc', 4)):
                self._add(f"head{stage}.{head}.weight", rng.normal(0.0, 0.01, (outputs, width, 3, 3)))
                self._add(f"head{stage}.{head}.bias", np.zeros(outputs))

    def _add(self, name: str, values: np.ndarray):
        self.params[name] = Tensor(values.astype(np.float32), requires_grad=True, name=name)

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state_hash(self) -> str:
        """SHA-256 over parameter names, shapes and bytes"""
        digest = hashlib.sha256()
        for name, param in self.params.items():
            digest.update(name.encode('utf-8'))
            digest.update(str(param.shape).encode('utf-8'))
            digest.update(np.ascontiguousarray(param.data, dtype='<f4').tobytes())
        return digest.hexdigest()

    def load_state(self, state: Dict[str, np.ndarray]):
        """Replace parameter values

        Raises:
            CheckpointError: On missing, extra or misshaped parameters
        """
        if set(state) != set(self.params):
            missing = sorted(set(self.params) - set(state))
            extra = sorted(set(state) - set(self.params))
            raise CheckpointError(f"parameter names differ from the spec (missing {missing}, unexpected {extra})")
        for name, param in self.params.items():
            values = np.asarray(state[name], dtype=np.float32)
            if values.shape != param.shape:
                raise CheckpointError(f"parameter {name} has shape {values.shape}, expected {param.shape}")
            param.data = values.copy()

    def zero_(self):
        for param in self.params.values():
            param.data = np.zeros_like(param.data)

    def _check_input(self, images: Tensor):
        expected = (self.spec.in_channels, self.spec.image_size, self.spec.image_size)
        if images.ndim != 4 or tuple(images.shape[1:]) != expected:
            raise DimensionError(f"detector input has shape {images.shape}, expected (N, {', '.join(map(str, expected))})")

    def forward_collect(self, images) -> Tuple[List[Tensor], DetectionOutput]:
        """Run the network

        Args:
            images: Batch of shape (N, 3, image_size, image_size)

        Returns:
            (every post-activation feature in forward order, head outputs)
        """
        x = as_tensor(images)
        self._check_input(x)
        n = x.shape[0]
        features, logits, offsets = [], [], []
        for stage in range(self.spec.num_stages):
            x = maxpool2x2(x)
            for block in range(self.spec.blocks_per_stage):
                prefix = f"stage{stage}.conv{block}"
                x = relu(conv2d(x, self.params[f"{prefix}.weight"], self.params[f"{prefix}.bias"], pad=1))
                features.append(x)
            if stage in self.spec.head_stages:
                for head, outputs, sink in (('cls', self.spec.num_classes + 1, logits), ('loc', 4, offsets)):
                    y = conv2d(x, self.params[f"head{stage}.{head}.weight"], self.params[f"head{stage}.{head}.bias"], pad=1)
                    sink.append(reshape(transpose(y, (0, 2, 3, 1)), (n, -1, outputs)))
        return features, DetectionOutput(logits=concat(logits, axis=1), offsets=concat(offsets, axis=1))

    def forward(self, images) -> DetectionOutput:
        return self.forward_collect(images)[1]
