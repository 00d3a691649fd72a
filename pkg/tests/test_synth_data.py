#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for synthetic scene generation and dataset I/O.
"""

import json
import os

import numpy as np
import pytest

from errors import AnnotationParseError, DataError
from synth_data import (
    MAX_OBJECTS, MAX_OCCLUSION, BoundingBox, SceneSpec, derive_seed, generate_dataset, generate_scene,
    parse_annotations, prepare_dataset, read_dataset, render_scene, write_dataset,
)


def test_bounding_box_invariants():
    BoundingBox(0, 0.1, 0.1, 0.2, 0.2)
    for coords in ((0.2, 0.1, 0.1, 0.2), (0.1, 0.1, 0.1001, 0.1001), (-0.1, 0.0, 0.5, 0.5), (0.5, 0.5, 1.2, 0.9)):
        with pytest.raises(DataError):
            BoundingBox(0, *coords)


def test_scene_is_deterministic():
    a, b = generate_scene(42), generate_scene(42)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.boxes == b.boxes
    assert not np.array_equal(generate_scene(43).image, a.image)


def test_scene_contents():
    for seed in range(20):
        scene = generate_scene(seed, SceneSpec(size=32))
        assert scene.image.shape == (3, 32, 32)
        assert scene.image.dtype == np.float32
        assert 0.0 <= scene.image.min() and scene.image.max() <= 1.0
        assert len(scene.boxes) <= MAX_OBJECTS
        assert all(b.class_id in (0, 1) for b in scene.boxes)


def test_classes_are_balanced():
    counts = np.zeros(2)
    for seed in range(400):
        for box in generate_scene(seed).boxes:
            counts[box.class_id] += 1
    share = counts / counts.sum()
    assert np.all(np.abs(share - 0.5) <= 0.1)


@pytest.mark.parametrize('class_id', [0, 1])
def test_boxes_are_tight_around_drawn_pixels(rng, class_id):
    for _ in range(10):
        extent = int(rng.integers(6, 20))
        x0, y0 = (int(v) for v in rng.integers(0, 32 - extent + 1, size=2))
        image, boxes = render_scene(np.zeros((32, 32, 3), dtype=np.uint8), [(class_id, x0, y0, extent, (200, 180, 160))])
        rows, cols = np.nonzero(image.sum(axis=0))
        box = boxes[0]
        assert abs(cols.min() - box.x1 * 32) <= 1 and abs(cols.max() + 1 - box.x2 * 32) <= 1
        assert abs(rows.min() - box.y1 * 32) <= 1 and abs(rows.max() + 1 - box.y2 * 32) <= 1


def test_objects_stay_mostly_visible():
    size = 64
    for seed in range(200):
        owner = np.full((size, size), -1)
        areas = []
        for i, box in enumerate(generate_scene(seed).boxes):
            x0, y0 = round(box.x1 * size), round(box.y1 * size)
            extent = round((box.x2 - box.x1) * size)
            owner[y0:y0 + extent, x0:x0 + extent] = i
            areas.append(extent * extent)
        for i, area in enumerate(areas):
            assert (owner == i).sum() >= (1.0 - MAX_OCCLUSION) * area


def test_derive_seed_is_stable_and_distinct():
    seeds = [derive_seed(7, k) for k in range(50)]
    assert seeds == [derive_seed(7, k) for k in range(50)]
    assert len(set(seeds)) == 50
    assert derive_seed(8, 0) != seeds[0]


def test_generate_dataset_splits_do_not_overlap():
    dataset = generate_dataset(0, {'train': 3, 'test': 2})
    seeds = [s.seed for split in ('train', 'test') for s in dataset.split(split)]
    assert seeds == [derive_seed(0, k) for k in range(5)]


def test_write_read_round_trip(tmp_path):
    dataset = generate_dataset(3, {'train': 4, 'test': 2}, SceneSpec(size=32))
    write_dataset(str(tmp_path), dataset, {'dataset_seed': 3})
    loaded = read_dataset(str(tmp_path))
    for split in ('train', 'test'):
        for original, restored in zip(dataset.split(split), loaded.split(split)):
            np.testing.assert_array_equal(original.image, restored.image)
            assert restored.seed == original.seed
            assert len(restored.boxes) == len(original.boxes)
            for a, b in zip(original.boxes, restored.boxes):
                assert a.class_id == b.class_id
                np.testing.assert_allclose(a.as_tuple(), b.as_tuple(), atol=1e-6)
    with open(tmp_path / 'meta.json', encoding='utf-8') as f:
        assert json.load(f)['dataset_seed'] == 3
    assert not [n for n in os.listdir(tmp_path / 'images') if n.startswith('.tmp-')]


def test_missing_split_is_named(tmp_path):
    write_dataset(str(tmp_path), generate_dataset(0, {'train': 1}, SceneSpec(size=32)))
    with pytest.raises(DataError, match='validation'):
        read_dataset(str(tmp_path), ['validation'])
    with pytest.raises(DataError, match='validation'):
        read_dataset(str(tmp_path)).split('validation')


def test_parse_annotations_reports_line(tmp_path):
    path = tmp_path / 'labels.txt'
    path.write_text("0 0.1 0.1 0.3 0.3\n\n1 0.2 0.2 0.4\n", encoding='utf-8')
    with pytest.raises(AnnotationParseError) as info:
        parse_annotations(str(path))
    assert info.value.line_number == 3
    assert 'labels.txt' in str(info.value)
    path.write_text("1 0.5 0.5 0.4 0.6\n", encoding='utf-8')
    with pytest.raises(AnnotationParseError):
        parse_annotations(str(path))


def test_missing_dataset_directory(tmp_path):
    with pytest.raises(DataError):
        read_dataset(str(tmp_path / 'nothing'))


def test_prepare_dataset_reuses_and_regenerates(tmp_path, caplog):
    directory = str(tmp_path / 'data')
    first = prepare_dataset(directory, 5, {'train': 2, 'test': 1}, SceneSpec(size=32))
    with caplog.at_level('INFO'):
        again = prepare_dataset(directory, 5, {'train': 2, 'test': 1}, SceneSpec(size=32))
    assert 'Reusing dataset' in caplog.text
    np.testing.assert_array_equal(first.split('train')[1].image, again.split('train')[1].image)
    other = prepare_dataset(directory, 6, {'train': 2, 'test': 1}, SceneSpec(size=32))
    assert other.split('train')[0].seed == derive_seed(6, 0)
