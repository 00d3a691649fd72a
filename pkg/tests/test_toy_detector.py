#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for the toy detector: architecture, anchors, targets, losses,
decoding and checkpoints.
"""

import math

import numpy as np
import pytest

from errors import CheckpointError, ConfigError
from synth_data import BoundingBox
from tensor_core import Tensor, check_gradients, default_dtype
from toy_detector import (
    AnchorGrid, DetectionOutput, DetectorModel, DetectorSpec, Targets, assign_batch, assign_targets,
    check_student_ratio, decode_boxes, detection_loss, infer_decode, load_checkpoint, mine_negatives, nms,
    save_checkpoint,
)
from toy_detector.checkpoint import decode_checkpoint, encode_checkpoint

TEACHER = DetectorSpec()
STUDENT = TEACHER.halved()


def test_spec_geometry_and_parameter_counts():
    assert TEACHER.feature_sizes() == [32, 16, 8, 4]
    assert STUDENT.widths == (8, 16, 32, 32)
    assert TEACHER.parameter_count() == 156037
    assert STUDENT.parameter_count() == 41741
    assert check_student_ratio(TEACHER, STUDENT) < 0.30


def test_spec_validation():
    with pytest.raises(ConfigError):
        DetectorSpec(image_size=60)
    with pytest.raises(ConfigError):
        DetectorSpec(head_stages=(1, 4), anchor_scales=(3.0, 3.0))
    with pytest.raises(ConfigError):
        DetectorSpec(anchor_scales=(3.0,))
    with pytest.raises(ConfigError):
        check_student_ratio(TEACHER, TEACHER)


def test_spec_round_trip_and_hash():
    assert DetectorSpec.from_dict(STUDENT.to_dict()) == STUDENT
    assert STUDENT.spec_hash() != TEACHER.spec_hash()


def test_model_parameters_match_spec():
    model = DetectorModel(STUDENT, seed=3)
    assert model.parameter_count() == STUDENT.parameter_count()
    assert list(model.parameters())[:2] == ['stage0.conv0.weight', 'stage0.conv0.bias']
    assert DetectorModel(STUDENT, seed=3).state_hash() == model.state_hash()
    assert DetectorModel(STUDENT, seed=4).state_hash() != model.state_hash()


def test_forward_shapes(rng):
    model = DetectorModel(STUDENT)
    images = rng.uniform(0.0, 1.0, (2, 3, 64, 64)).astype(np.float32)
    features, outputs = model.forward_collect(images)
    assert len(features) == STUDENT.num_stages * STUDENT.blocks_per_stage
    assert [f.shape[2] for f in features] == [32, 32, 16, 16, 8, 8, 4, 4]
    assert outputs.logits.shape == (2, 16 * 16 + 8 * 8 + 4 * 4, 3)
    assert outputs.offsets.shape == (2, 336, 4)


def test_anchor_grid():
    anchors = AnchorGrid.for_spec(TEACHER)
    assert len(anchors) == 336
    center = 16 * 8 + 8
    np.testing.assert_allclose(anchors.corners[center], [0.4375, 0.4375, 0.625, 0.625])
    assert anchors.stage_of[0] == 1 and anchors.stage_of[-1] == 3
    assert anchors.corners.min() >= 0.0 and anchors.corners.max() <= 1.0


def test_assign_targets_exact_anchor():
    anchors = AnchorGrid.for_spec(TEACHER)
    box = BoundingBox(1, 0.4375, 0.4375, 0.625, 0.625)
    targets = assign_targets(anchors, [box])
    index = 16 * 8 + 8
    assert targets.labels[index] == 2
    np.testing.assert_allclose(targets.offsets[index], 0.0, atol=1e-12)
    assert np.all(targets.labels[anchors.stage_of == 3] == 0)


def test_assign_targets_forces_best_anchor():
    anchors = AnchorGrid.for_spec(TEACHER)
    targets = assign_targets(anchors, [BoundingBox(0, 0.5, 0.5, 0.52, 0.52)])
    assert targets.positive.sum() == 1
    assert set(targets.labels[targets.positive]) == {1}


def test_assign_batch_without_boxes():
    anchors = AnchorGrid.for_spec(TEACHER)
    targets = assign_batch(anchors, [[], [BoundingBox(0, 0.1, 0.1, 0.4, 0.4)]])
    assert targets.labels.shape == (2, 336)
    assert targets.positive[0].sum() == 0
    assert targets.positive[1].sum() >= 1


def test_mine_negatives_ratio_and_fallback():
    ce = np.arange(20, dtype=np.float64)[None].repeat(2, axis=0)
    labels = np.zeros((2, 20), dtype=np.int64)
    labels[0, 0] = 1
    selected = mine_negatives(ce, labels)
    assert set(np.flatnonzero(selected[0])) == {0, 17, 18, 19}
    assert selected[1].sum() == 8
    assert set(np.flatnonzero(selected[1])) == set(range(12, 20))


def _outputs(anchors, logits=None, offsets=None):
    a = anchors
    logits = np.zeros((1, a, 3)) if logits is None else logits
    offsets = np.zeros((1, a, 4)) if offsets is None else offsets
    return DetectionOutput(Tensor(logits, requires_grad=True), Tensor(offsets, requires_grad=True))


def test_detection_loss_values():
    labels = np.zeros((1, 10), dtype=np.int64)
    labels[0, 3] = 2
    target_offsets = np.zeros((1, 10, 4))
    offsets = np.zeros((1, 10, 4))
    offsets[0, 3, 1] = 0.2
    l_c, l_l = detection_loss(_outputs(10, offsets=offsets), Targets(labels, target_offsets))
    assert l_c.item() == pytest.approx(math.log(3.0))
    assert l_l.item() == pytest.approx(0.5 * 0.2 ** 2 / 4)


def test_detection_loss_without_positives():
    l_c, l_l = detection_loss(_outputs(12), Targets(np.zeros((1, 12), dtype=np.int64), np.zeros((1, 12, 4))))
    assert l_l.item() == 0.0
    assert l_c.item() == pytest.approx(math.log(3.0))


def test_detection_loss_gradients(rng):
    labels = np.array([[0, 1, 0, 0, 2, 0]])
    target_offsets = rng.standard_normal((1, 6, 4)) * 0.3

    def fn(logits, offsets):
        l_c, l_l = detection_loss(DetectionOutput(logits, offsets), Targets(labels, target_offsets))
        return l_c + l_l

    for _ in range(10):
        logits = rng.standard_normal((1, 6, 3))
        offsets = target_offsets + rng.choice([-1, 1], (1, 6, 4)) * rng.uniform(0.1, 0.8, (1, 6, 4))
        with default_dtype(np.float64):
            assert check_gradients(fn, [logits, offsets]) < 1e-4


def test_nms_fixture():
    boxes = np.array([[0, 0, 1, 1], [0, 0, 1, 0.9], [0, 0, 0.5, 0.5], [0, 0, 1, 0.5]], dtype=np.float64)
    scores = np.array([0.9, 0.8, 0.7, 0.6])
    # IoU(0, 1) = 0.9 is suppressed; IoU(0, 3) = 0.5 equals the threshold and survives
    assert nms(boxes, scores, 0.5) == [0, 2, 3]


def test_decode_zero_offsets_returns_anchors():
    anchors = AnchorGrid.for_spec(TEACHER)
    np.testing.assert_allclose(decode_boxes(np.zeros((len(anchors), 4)), anchors), anchors.corners, atol=1e-12)


def test_infer_decode_picks_confident_anchor():
    anchors = AnchorGrid.for_spec(TEACHER)
    logits = np.zeros((2, len(anchors), 3))
    logits[:, :, 0] = 10.0
    logits[1, 136] = [0.0, 0.0, 10.0]
    detections = infer_decode(_outputs(len(anchors), logits=logits), anchors, 0.5, 0.45, first_image_id=5)
    assert detections[0] == []
    assert len(detections[1]) == 1
    det = detections[1][0]
    assert (det.image_id, det.class_id) == (6, 1)
    np.testing.assert_allclose(det.as_tuple(), anchors.corners[136])


def test_infer_decode_caps_detections(rng):
    anchors = AnchorGrid.for_spec(TEACHER)
    outputs = DetectorModel(TEACHER).forward(rng.uniform(0, 1, (1, 3, 64, 64)).astype(np.float32))
    detections = infer_decode(outputs, anchors, 0.0, 1.0, max_detections=100)[0]
    assert len(detections) == 100
    assert all(a.score >= b.score for a, b in zip(detections, detections[1:]))


def test_checkpoint_round_trip(tmp_path, rng):
    model = DetectorModel(STUDENT, seed=11)
    path = str(tmp_path / 'model.hgd')
    save_checkpoint(path, model)
    loaded = load_checkpoint(path, expected_spec=STUDENT)
    assert loaded.state_hash() == model.state_hash()
    images = rng.uniform(0, 1, (1, 3, 64, 64)).astype(np.float32)
    np.testing.assert_array_equal(loaded.forward(images).logits.data, model.forward(images).logits.data)


def test_checkpoint_rejects_other_spec(tmp_path):
    path = str(tmp_path / 'teacher.hgd')
    save_checkpoint(path, DetectorModel(TEACHER))
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_spec=STUDENT)


def test_checkpoint_corruption():
    data = encode_checkpoint(DetectorModel(STUDENT))
    with pytest.raises(CheckpointError, match='truncated'):
        decode_checkpoint(data[:-3])
    with pytest.raises(CheckpointError, match='trailing'):
        decode_checkpoint(data + b'\0')
    with pytest.raises(CheckpointError):
        decode_checkpoint(b'XXXX' + data[4:])
    with pytest.raises(CheckpointError):
        load_checkpoint('/nonexistent/model.hgd')


def test_zero_model_outputs_zero_features():
    model = DetectorModel(STUDENT)
    model.zero_()
    features, _ = model.forward_collect(np.ones((1, 3, 64, 64), dtype=np.float32))
    assert all(not f.data.any() for f in features)
