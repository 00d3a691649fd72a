#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Offset decoding and per-class greedy non-maximum suppression.
"""

from typing import List

import numpy as np

from evaluation import Detection, iou_matrix

from .anchors import AnchorGrid, centers_to_corners
from .model import DetectionOutput

MAX_DETECTIONS = 100


def decode_boxes(offsets: np.ndarray, anchors: AnchorGrid) -> np.ndarray:
    """Inverse of the offset encoding, clipped to [0, 1]; returns (A, 4) corners"""
    a = anchors.centers
    centers = np.stack([
        a[:, 0] + offsets[:, 0] * a[:, 2],
        a[:, 1] + offsets[:, 1] * a[:, 3],
        a[:, 2] * np.exp(offsets[:, 2]),
        a[:, 3] * np.exp(offsets[:, 3]),
    ], axis=1)
    return np.clip(centers_to_corners(centers), 0.0, 1.0)


def nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> List[int]:
    """Greedy NMS; a box is suppressed when its IoU with a kept box exceeds the threshold

    Returns:
        Kept indices in descending score order
    """
    order = np.argsort(-np.asarray(scores), kind='stable')
    overlaps = iou_matrix(boxes, boxes)
    keep: List[int] = []
    suppressed = np.zeros(len(order), dtype=bool)
    for i in order:
        if suppressed[i]:
            continue
        keep.append(int(i))
        suppressed |= overlaps[i] > iou_threshold
    return keep


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def infer_decode(outputs: DetectionOutput, anchors: AnchorGrid, score_threshold: float, nms_iou: float,
                 first_image_id: int = 0, max_detections: int = MAX_DETECTIONS) -> List[List[Detection]]:
    """Detections per image

    Background is dropped, class scores at or below the threshold are
    discarded, NMS runs per class, and at most max_detections boxes per
    image are kept by score.
    """
    probs = _softmax(outputs.logits.data.astype(np.float64))
    offsets = outputs.offsets.data.astype(np.float64)
    results = []
    for n in range(probs.shape[0]):
        boxes = decode_boxes(offsets[n], anchors)
        valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
        found = []
        for c in range(1, probs.shape[2]):
            candidates = np.flatnonzero(valid & (probs[n, :, c] > score_threshold))
            if candidates.size == 0:
                continue
            for k in nms(boxes[candidates], probs[n, candidates, c], nms_iou):
                idx = candidates[k]
                found.append(Detection(first_image_id + n, c - 1, float(probs[n, idx, c]), *map(float, boxes[idx])))
        found.sort(key=lambda d: -d.score)
        results.append(found[:max_detections])
    return results
