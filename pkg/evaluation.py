#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
VOC-style mean average precision.

AP uses all-point interpolation: the area under the monotone precision
envelope, which equals the envelope summed at each true-positive rank
divided by the number of ground truths.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_IOU_THRESHOLD = 0.5
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))


@dataclass(frozen=True)
class Detection:
    """Scored box predicted for one image"""
    image_id: int
    class_id: int
    score: float
    x1: float
    y1: float
    x2: float
    y2: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def _coords(box) -> Tuple[float, float, float, float]:
    if hasattr(box, 'as_tuple'):
        return box.as_tuple()
    x1, y1, x2, y2 = box
    return (float(x1), float(y1), float(x2), float(y2))


def iou(a, b) -> float:
    """Intersection over union of two corner-form boxes"""
    ax1, ay1, ax2, ay2 = _coords(a)
    bx1, by1, bx2, by2 = _coords(b)
    inter_w = min(ax2, bx2) - max(ax1, bx1)
    inter_h = min(ay2, by2) - max(ay1, by1)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (M, 4) and (K, 4) corner-form arrays"""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    inter_w = np.clip(np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0, None)
    inter_h = np.clip(np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0, None)
    inter = inter_w * inter_h
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def _match(detections: Sequence[Detection], gts: Sequence[Sequence], iou_threshold: float) -> np.ndarray:
    """Greedy matching in descending score order; True marks a true positive"""
    order = sorted(range(len(detections)), key=lambda k: -detections[k].score)
    matched = [np.zeros(len(g), dtype=bool) for g in gts]
    is_tp = np.zeros(len(order), dtype=bool)
    for rank, k in enumerate(order):
        det = detections[k]
        image_gts = gts[det.image_id]
        best, best_iou = -1, iou_threshold
        for g, gt in enumerate(image_gts):
            if matched[det.image_id][g]:
                continue
            overlap = iou(det, gt)
            if overlap >= best_iou:
                best, best_iou = g, overlap
        if best >= 0:
            matched[det.image_id][best] = True
            is_tp[rank] = True
    return is_tp


def average_precision(detections: Sequence[Detection], gts: Sequence[Sequence],
                      iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> float:
    """All-point interpolated AP for one class

    Args:
        detections: Detections of one class; image_id indexes gts
        gts: Ground-truth boxes of that class, one list per image

    Returns:
        AP in [0, 1]; 0 when there are no ground truths
    """
    num_gt = sum(len(g) for g in gts)
    if num_gt == 0 or not detections:
        return 0.0
    is_tp = _match(detections, gts, iou_threshold)
    tp = np.cumsum(is_tp)
    precision = tp / np.arange(1, len(is_tp) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(envelope[is_tp].sum() / num_gt)


@dataclass
class EvalResult:
    """Per-class AP, mAP and match counts at the primary IoU threshold"""
    per_class_ap: Dict[int, float]
    map: float
    counts: Dict[int, Dict[str, int]]
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    map_by_threshold: Dict[float, float] = field(default_factory=dict)
    map_coco: Optional[float] = None

    def to_dict(self) -> dict:
        result = {
            'iou_threshold': self.iou_threshold,
            'map': self.map,
            'per_class_ap': {str(c): ap for c, ap in sorted(self.per_class_ap.items())},
            'counts': {str(c): dict(v) for c, v in sorted(self.counts.items())},
        }
        if self.map_by_threshold:
            result['map_by_threshold'] = {f"{t:.2f}": v for t, v in sorted(self.map_by_threshold.items())}
        if self.map_coco is not None:
            result['map_coco'] = self.map_coco
        return result

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'


def _by_class(detections: Sequence[Detection], gts: Sequence[Sequence], class_id: int):
    class_dets = [d for d in detections if d.class_id == class_id]
    class_gts = [[g for g in image if g.class_id == class_id] for image in gts]
    return class_dets, class_gts


def _class_map(detections, gts, classes, iou_threshold) -> Tuple[Dict[int, float], float]:
    per_class = {}
    for c in classes:
        class_dets, class_gts = _by_class(detections, gts, c)
        if sum(len(g) for g in class_gts) == 0:
            continue
        per_class[c] = average_precision(class_dets, class_gts, iou_threshold)
    value = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, value


def mean_ap(detections: Sequence[Detection], gts: Sequence[Sequence], classes: Sequence[int],
            iou_thresholds: Sequence[float] = (DEFAULT_IOU_THRESHOLD,)) -> EvalResult:
    """mAP over the classes present in the ground truth

    Args:
        detections: All detections; image_id indexes gts
        gts: Ground-truth boxes (with class_id) per image
        classes: Class ids to evaluate
        iou_thresholds: First entry is the primary threshold; with more than
            one entry the mAP at each is reported and averaged

    Returns:
        EvalResult
    """
    thresholds = list(iou_thresholds)
    primary = thresholds[0]
    per_class, value = _class_map(detections, gts, classes, primary)

    counts: Dict[int, Dict[str, int]] = {}
    for c in classes:
        class_dets, class_gts = _by_class(detections, gts, c)
        num_gt = sum(len(g) for g in class_gts)
        tp = int(_match(class_dets, class_gts, primary).sum()) if class_dets else 0
        counts[c] = {'tp': tp, 'fp': len(class_dets) - tp, 'fn': num_gt - tp}

    result = EvalResult(per_class_ap=per_class, map=value, counts=counts, iou_threshold=primary)
    if len(thresholds) > 1:
        result.map_by_threshold = {t: _class_map(detections, gts, classes, t)[1] for t in thresholds}
        result.map_coco = float(np.mean(list(result.map_by_threshold.values())))
    return result
