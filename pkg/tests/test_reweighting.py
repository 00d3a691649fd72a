#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for macro / micro weighting strategies and their composition.
"""

import os

import numpy as np
import pytest

from errors import ConfigError
from feature_matching import MatchedPair
from imitation_losses import ImitationConfig
from reweighting import (
    MACRO, MICRO, StrategyRegistry, compose_weights, export_weight_maps, focal_stage_weights, get_registry,
    gt_mask_weights, nearest_resize, spatial_stat_weights, stage_weight_from_spatial,
)
from synth_data import BoundingBox
from tensor_core import Tensor


def _random_boxes(rng, count):
    boxes = []
    for _ in range(count):
        x1, y1 = rng.uniform(0.0, 0.8, 2)
        w, h = rng.uniform(0.05, 0.3, 2)
        boxes.append(BoundingBox(int(rng.integers(0, 2)), x1, y1, min(x1 + w, 1.0), min(y1 + h, 1.0)))
    return boxes


def _brute_force_foreground(boxes, height, width):
    count = 0
    for i in range(height):
        for j in range(width):
            cy, cx = (i + 0.5) / height, (j + 0.5) / width
            if any(b.x1 <= cx <= b.x2 and b.y1 <= cy <= b.y2 for b in boxes):
                count += 1
    return count


@pytest.mark.parametrize('gamma', [0.5, 1.0, 2.0])
def test_focal_weight_non_increasing_in_share(gamma):
    shares = np.linspace(0.0, 1.0, 51)
    weights = [focal_stage_weights([p, 1.0 - p], gamma)[0] for p in shares]
    assert all(b <= a for a, b in zip(weights, weights[1:]))
    assert weights[0] == pytest.approx(1.0)
    assert weights[-1] == pytest.approx(0.0)


def test_focal_all_zero_losses_are_uniform():
    np.testing.assert_array_equal(focal_stage_weights([0.0, 0.0, 0.0], 2.0), np.ones(3))


def test_gt_mask_counts_match_brute_force(rng):
    for _ in range(100):
        boxes = _random_boxes(rng, int(rng.integers(0, 5)))
        h, w = (int(x) for x in rng.integers(2, 17, 2))
        assert gt_mask_weights(boxes, h, w).sum() == _brute_force_foreground(boxes, h, w)


def test_gt_mask_boundary_is_inclusive():
    mask = gt_mask_weights([BoundingBox(0, 0.0, 0.0, 0.375, 0.375)], 4, 4)
    expected = np.zeros((4, 4))
    expected[:2, :2] = 1.0
    np.testing.assert_array_equal(mask, expected)


def test_gt_mask_without_boxes_is_empty():
    assert gt_mask_weights([], 3, 3).sum() == 0.0


def test_spatial_stat_weights_are_sigmoid_of_channel_stats(rng):
    feature = rng.standard_normal((2, 4, 3, 3))
    v = spatial_stat_weights(Tensor(feature), 'mean')
    np.testing.assert_allclose(v, 1.0 / (1.0 + np.exp(-feature.mean(axis=1))), rtol=1e-12)
    resized = spatial_stat_weights(Tensor(feature), 'variance', target_hw=(6, 6))
    assert resized.shape == (2, 6, 6)
    assert np.all((resized > 0) & (resized < 1))


def test_spatial_variance_weight_value():
    feature = Tensor(np.array([1.0, 3.0]).reshape(1, 2, 1, 1))
    np.testing.assert_allclose(spatial_stat_weights(feature, 'variance'), [[[1.0 / (1.0 + np.exp(-1.0))]]], rtol=1e-12)


def test_nearest_resize_repeats_cells():
    grid = np.arange(4.0).reshape(2, 2)
    np.testing.assert_array_equal(nearest_resize(grid, 4, 4), np.kron(grid, np.ones((2, 2))))


def test_stage_weight_is_spatial_mean():
    v = np.arange(8.0).reshape(2, 2, 2)
    np.testing.assert_allclose(stage_weight_from_spatial(v), [1.5, 5.5])


def _pairs(rng, batch=2):
    pairs = []
    for s, size in enumerate((8, 4)):
        student = Tensor(rng.standard_normal((batch, 3, size, size)))
        teacher = Tensor(rng.standard_normal((batch, 6, size, size)))
        pairs.append(MatchedPair(student_adapted=Tensor(rng.standard_normal((batch, 6, size, size))),
                                 teacher=teacher, stage=s, student_raw=student, key=f"s{s}"))
    return pairs


@pytest.mark.parametrize('macro', ['none', 'focal', 'stage_mean', 'stage_variance'])
@pytest.mark.parametrize('micro', ['none', 'spatial_mean', 'spatial_variance', 'gt_mask'])
def test_compose_weights_shapes(rng, macro, micro):
    pairs = _pairs(rng)
    boxes = [_random_boxes(rng, 2), []]
    config = ImitationConfig(macro_weight=macro, micro_weight=micro)
    weights = compose_weights(config, pairs, rng.uniform(0.1, 1.0, (2, 2)), boxes)
    assert weights.u.shape == (2, 2)
    assert [v.shape for v in weights.v] == [(2, 8, 8), (2, 4, 4)]
    assert weights.provenance == {'macro': macro, 'micro': micro}
    if micro == 'gt_mask':
        assert weights.v[0][1].sum() == 0.0


def test_registry_lookup_and_custom_strategies():
    registry = get_registry()
    assert registry.get_strategies_by_category(MACRO) == ['focal', 'none', 'stage_mean', 'stage_variance']
    with pytest.raises(ConfigError, match='Available: gt_mask, none, spatial_mean, spatial_variance'):
        registry.get(MICRO, 'edges')

    local = StrategyRegistry()

    @local.register('constant', category=MICRO)
    def constant(pair, boxes, config):
        """Half everywhere"""
        return np.full(pair.teacher.shape[:1] + pair.teacher.shape[2:], 0.5)

    assert local.get(MICRO, 'constant').description == 'Half everywhere'
    assert local.has_strategy(MICRO, 'constant')
    assert not registry.has_strategy(MICRO, 'constant')
    with pytest.raises(ConfigError, match="Unknown macro weighting 'constant'. Available: $"):
        local.get(MACRO, 'constant')
    with pytest.raises(ConfigError):
        local.register('x', category='mezzo')


def test_export_weight_maps(tmp_path, rng):
    pairs = _pairs(rng)
    weights = compose_weights(ImitationConfig(macro_weight='stage_mean', micro_weight='spatial_mean'),
                              pairs, np.ones((2, 2)), [[], []])
    paths = export_weight_maps(weights, str(tmp_path), ['s0', 's1'], image=1)
    assert [os.path.basename(p) for p in paths] == ['u.csv', 'v_s0.csv', 'v_s1.csv']
    with open(paths[0], encoding='utf-8') as f:
        assert f.readline().strip() == 's0,s1'
    grid = np.loadtxt(paths[1], delimiter=',')
    np.testing.assert_allclose(grid, weights.v[0][1], atol=1e-6)
