#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for IoU, average precision and mAP.
"""

import json

import numpy as np
import pytest

from evaluation import COCO_IOU_THRESHOLDS, Detection, average_precision, iou, iou_matrix, mean_ap
from synth_data import BoundingBox

GT = [BoundingBox(0, 0.0, 0.0, 0.2, 0.2), BoundingBox(0, 0.4, 0.4, 0.6, 0.6), BoundingBox(0, 0.7, 0.7, 0.9, 0.9)]


def _det(score, box, image_id=0, class_id=0):
    return Detection(image_id, class_id, score, *box)


def _fixture_detections():
    # ranked TP, FP, TP, TP: precisions 1, 1/2, 2/3, 3/4
    return [
        _det(0.9, GT[0].as_tuple()),
        _det(0.8, (0.2, 0.6, 0.35, 0.75)),
        _det(0.7, GT[1].as_tuple()),
        _det(0.6, GT[2].as_tuple()),
    ]


def test_iou_exact_values():
    assert iou([0, 0, 1, 1], [0.5, 0, 1.5, 1]) == 1 / 3
    assert iou([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert iou([0, 0, 1, 1], [1, 0, 2, 1]) == 0.0


def test_iou_matrix_matches_pairwise(rng):
    a = np.sort(rng.uniform(0, 1, (5, 2, 2)), axis=1).reshape(5, 4)
    b = np.sort(rng.uniform(0, 1, (3, 2, 2)), axis=1).reshape(3, 4)
    matrix = iou_matrix(a, b)
    for i in range(5):
        for j in range(3):
            assert matrix[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)


def test_average_precision_fixture():
    assert average_precision(_fixture_detections(), [GT]) == 5 / 6


def test_average_precision_order_independent():
    assert average_precision(list(reversed(_fixture_detections())), [GT]) == 5 / 6


def test_average_precision_ignores_score_scale():
    scaled = [_det(d.score * 3.7, (d.x1, d.y1, d.x2, d.y2)) for d in _fixture_detections()]
    assert average_precision(scaled, [GT]) == 5 / 6


def test_trailing_false_positive_does_not_raise_ap():
    detections = _fixture_detections() + [_det(0.01, (0.9, 0.0, 0.95, 0.05))]
    assert average_precision(detections, [GT]) <= 5 / 6


def test_duplicate_detection_is_false_positive():
    detections = [_det(0.9, GT[0].as_tuple()), _det(0.8, GT[0].as_tuple())]
    assert average_precision(detections, [GT[:1]]) == 1.0
    result = mean_ap(detections, [GT[:1]], [0])
    assert result.counts[0] == {'tp': 1, 'fp': 1, 'fn': 0}


def test_average_precision_edge_cases():
    assert average_precision([], [GT]) == 0.0
    assert average_precision(_fixture_detections(), [[]]) == 0.0


def test_mean_ap_skips_classes_without_ground_truth():
    gts = [[GT[0], BoundingBox(1, 0.4, 0.4, 0.6, 0.6)], []]
    detections = [_det(0.9, GT[0].as_tuple()), _det(0.5, (0.4, 0.4, 0.6, 0.6), class_id=1),
                  _det(0.4, (0.1, 0.1, 0.3, 0.3), image_id=1, class_id=2)]
    result = mean_ap(detections, gts, [0, 1, 2])
    assert result.per_class_ap == {0: 1.0, 1: 1.0}
    assert result.map == 1.0
    assert result.counts[2] == {'tp': 0, 'fp': 1, 'fn': 0}


def test_mean_ap_with_coco_thresholds():
    shifted = [_det(0.9, (0.0, 0.0, 0.2, 0.24))]
    result = mean_ap(shifted, [[GT[0]]], [0], COCO_IOU_THRESHOLDS)
    # IoU 0.83: a hit up to the 0.80 threshold, a miss above
    assert result.map == 1.0
    assert result.map_by_threshold[0.8] == 1.0
    assert result.map_by_threshold[0.85] == 0.0
    assert result.map_coco == pytest.approx(0.7)
    data = json.loads(result.to_json())
    assert data['map_by_threshold']['0.50'] == 1.0
    assert result.to_json() == mean_ap(shifted, [[GT[0]]], [0], COCO_IOU_THRESHOLDS).to_json()
