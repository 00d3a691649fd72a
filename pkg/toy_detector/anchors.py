#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
One square anchor per cell of every head stage.

Anchor order matches the detector output: head stages in order, cells in
row-major order inside a stage.
"""

from dataclasses import dataclass

import numpy as np

from .spec import DetectorSpec


def corners_to_centers(corners: np.ndarray) -> np.ndarray:
    x1, y1, x2, y2 = np.moveaxis(corners, -1, 0)
    return np.stack([(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1], axis=-1)


def centers_to_corners(centers: np.ndarray) -> np.ndarray:
    cx, cy, w, h = np.moveaxis(centers, -1, 0)
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


@dataclass
class AnchorGrid:
    """Anchors in normalized coordinates

    corners: (A, 4) x1, y1, x2, y2 clamped to [0, 1]
    centers: (A, 4) cx, cy, w, h of the clamped corners
    stage_of: (A,) head stage of each anchor
    """
    corners: np.ndarray
    centers: np.ndarray
    stage_of: np.ndarray

    def __len__(self) -> int:
        return self.corners.shape[0]

    @classmethod
    def for_spec(cls, spec: DetectorSpec) -> 'AnchorGrid':
        blocks, stages = [], []
        for stage, anchor_scale in zip(spec.head_stages, spec.anchor_scales):
            size = spec.feature_sizes()[stage]
            side = anchor_scale * spec.stride(stage) / spec.image_size
            ys, xs = np.meshgrid((np.arange(size) + 0.5) / size, (np.arange(size) + 0.5) / size, indexing='ij')
            centers = np.stack([xs.ravel(), ys.ravel(), np.full(size * size, side), np.full(size * size, side)], axis=1)
            blocks.append(centers_to_corners(centers))
            stages.append(np.full(size * size, stage))
        corners = np.clip(np.concatenate(blocks), 0.0, 1.0)
        return cls(corners=corners, centers=corners_to_centers(corners), stage_of=np.concatenate(stages))
