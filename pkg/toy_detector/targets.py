#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SSD-style anchor matching and box offset encoding.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from evaluation import iou_matrix

from .anchors import AnchorGrid, corners_to_centers

POSITIVE_IOU = 0.5


@dataclass
class Targets:
    """Per-anchor training targets

    labels: (..., A) with 0 for background and class_id + 1 otherwise
    offsets: (..., A, 4) encoded box of the matched ground truth, 0 for background
    """
    labels: np.ndarray
    offsets: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.labels > 0


def encode_offsets(boxes: np.ndarray, anchor_centers: np.ndarray) -> np.ndarray:
    """dx = (cx - cx_a) / w_a, dy likewise, dw = log(w / w_a), dh likewise"""
    gt = corners_to_centers(boxes)
    return np.stack([
        (gt[:, 0] - anchor_centers[:, 0]) / anchor_centers[:, 2],
        (gt[:, 1] - anchor_centers[:, 1]) / anchor_centers[:, 3],
        np.log(gt[:, 2] / anchor_centers[:, 2]),
        np.log(gt[:, 3] / anchor_centers[:, 3]),
    ], axis=1)


def assign_targets(anchors: AnchorGrid, boxes: Sequence, iou_threshold: float = POSITIVE_IOU) -> Targets:
    """Match ground truth to anchors

    An anchor is positive when its best IoU reaches the threshold; each box
    also claims its single best anchor regardless of IoU.
    """
    count = len(anchors)
    labels = np.zeros(count, dtype=np.int64)
    offsets = np.zeros((count, 4), dtype=np.float64)
    if not boxes:
        return Targets(labels, offsets)
    gt = np.array([box.as_tuple() for box in boxes], dtype=np.float64)
    classes = np.array([box.class_id for box in boxes], dtype=np.int64)
    overlaps = iou_matrix(anchors.corners, gt)
    matched = overlaps.argmax(axis=1)
    positive = overlaps[np.arange(count), matched] >= iou_threshold
    for b in range(len(boxes)):
        best = int(overlaps[:, b].argmax())
        if overlaps[best, b] > 0:
            matched[best] = b
            positive[best] = True
    labels[positive] = classes[matched[positive]] + 1
    offsets[positive] = encode_offsets(gt[matched[positive]], anchors.centers[positive])
    return Targets(labels, offsets)


def assign_batch(anchors: AnchorGrid, boxes: Sequence[Sequence]) -> Targets:
    """assign_targets for every image, stacked to (N, A) and (N, A, 4)"""
    per_image = [assign_targets(anchors, image_boxes) for image_boxes in boxes]
    return Targets(np.stack([t.labels for t in per_image]), np.stack([t.offsets for t in per_image]))
