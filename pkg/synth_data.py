#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Synthetic detection dataset: colored circles and squares on a noise
background, with tight normalized ground-truth boxes.

On-disk layout of a dataset directory:
    images/NNNNN.ppm   binary PPM (P6)
    labels/NNNNN.txt   one "class_id x1 y1 x2 y2" line per object
    index.txt          one "NNNNN split" line per scene
    meta.json          generation parameters and per-scene seeds
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from errors import AnnotationParseError, DataError
import run_manager

logger = logging.getLogger(__name__)

CLASS_NAMES = ('circle', 'square')
MIN_BOX_AREA = 1e-4
MAX_OBJECTS = 4
MAX_OCCLUSION = 0.5
PLACEMENT_ATTEMPTS = 10


@dataclass(frozen=True)
class BoundingBox:
    """Ground-truth box in normalized [0, 1] corner coordinates"""
    class_id: int
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DataError(f"degenerate box {self.as_tuple()}")
        if (self.x2 - self.x1) * (self.y2 - self.y1) < MIN_BOX_AREA:
            raise DataError(f"box {self.as_tuple()} is smaller than the minimum area {MIN_BOX_AREA}")
        if min(self.x1, self.y1) < 0.0 or max(self.x2, self.y2) > 1.0:
            raise DataError(f"box {self.as_tuple()} lies outside the image")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def to_line(self) -> str:
        return f"{self.class_id} {self.x1:.6f} {self.y1:.6f} {self.x2:.6f} {self.y2:.6f}"


@dataclass
class LabeledScene:
    """Image (3 x H x W, values in [0, 1]) with its ground-truth boxes"""
    image: np.ndarray
    boxes: List[BoundingBox] = field(default_factory=list)
    seed: Optional[int] = None


@dataclass(frozen=True)
class SceneSpec:
    """Generation parameters"""
    size: int = 64
    num_classes: int = 2
    min_extent: int = 10
    max_extent: int = 28
    noise_level: int = 60


@dataclass
class Dataset:
    """Scenes grouped by split name"""
    splits: Dict[str, List[LabeledScene]]

    def split(self, name: str) -> List[LabeledScene]:
        if name not in self.splits:
            raise DataError(f"split '{name}' not found; available splits: {sorted(self.splits)}")
        return self.splits[name]


def derive_seed(dataset_seed: int, index: int) -> int:
    """Independent per-scene seed, stable across runs and platforms"""
    return int(np.random.SeedSequence(dataset_seed, spawn_key=(index,)).generate_state(1)[0])


def _noise_background(rng: np.random.Generator, size: int, level: int) -> np.ndarray:
    base = rng.integers(0, 50, size=3)
    noise = rng.integers(0, level + 1, size=(size, size, 3))
    return (base + noise).clip(0, 255).astype(np.uint8)


def render_scene(background: np.ndarray, objects: Sequence[Tuple[int, int, int, int, Tuple[int, int, int]]]) -> Tuple[np.ndarray, List[BoundingBox]]:
    """Draw shapes and return the CHW float image plus tight boxes

    Args:
        background: HxWx3 uint8 array
        objects: (class_id, x0, y0, extent, color); the shape covers pixels
            x0..x0+extent-1 and y0..y0+extent-1
    """
    height, width = background.shape[:2]
    canvas = Image.fromarray(background)
    draw = ImageDraw.Draw(canvas)
    boxes = []
    for class_id, x0, y0, extent, color in objects:
        corners = [x0, y0, x0 + extent - 1, y0 + extent - 1]
        if CLASS_NAMES[class_id] == 'circle':
            draw.ellipse(corners, fill=tuple(color))
        else:
            draw.rectangle(corners, fill=tuple(color))
        boxes.append(BoundingBox(class_id, x0 / width, y0 / height, (x0 + extent) / width, (y0 + extent) / height))
    image = np.asarray(canvas, dtype=np.float32).transpose(2, 0, 1) / np.float32(255.0)
    return image, boxes


def _occlusion_ok(owner: np.ndarray, areas: Sequence[int], x0: int, y0: int, extent: int) -> bool:
    """True if every earlier object keeps at least 1 - MAX_OCCLUSION of its footprint visible"""
    if not areas:
        return True
    visible = np.bincount(owner[owner >= 0], minlength=len(areas))
    window = owner[y0:y0 + extent, x0:x0 + extent]
    hidden = np.bincount(window[window >= 0], minlength=len(areas))
    return bool(np.all(visible - hidden >= (1.0 - MAX_OCCLUSION) * np.asarray(areas)))


def generate_scene(seed: int, spec: SceneSpec = SceneSpec()) -> LabeledScene:
    """Deterministic scene for a seed: 0-4 shapes on a noise background

    A shape whose square footprint would hide more than MAX_OCCLUSION of an
    earlier one is re-placed, and dropped after PLACEMENT_ATTEMPTS tries.
    """
    rng = np.random.default_rng(seed)
    background = _noise_background(rng, spec.size, spec.noise_level)
    count = int(rng.integers(0, MAX_OBJECTS + 1))
    owner = np.full((spec.size, spec.size), -1, dtype=np.int64)
    areas: List[int] = []
    objects = []
    for _ in range(count):
        class_id = int(rng.integers(0, spec.num_classes))
        color = tuple(int(c) for c in rng.integers(120, 256, size=3))
        for _attempt in range(PLACEMENT_ATTEMPTS):
            extent = int(rng.integers(spec.min_extent, spec.max_extent + 1))
            x0 = int(rng.integers(0, spec.size - extent + 1))
            y0 = int(rng.integers(0, spec.size - extent + 1))
            if _occlusion_ok(owner, areas, x0, y0, extent):
                break
        else:
            logger.debug(f"scene {seed}: no placement for object {len(objects) + 1}, dropped")
            continue
        owner[y0:y0 + extent, x0:x0 + extent] = len(areas)
        areas.append(extent * extent)
        objects.append((class_id, x0, y0, extent, color))
    image, boxes = render_scene(background, objects)
    return LabeledScene(image=image, boxes=boxes, seed=seed)


def generate_dataset(dataset_seed: int, split_counts: Dict[str, int], spec: SceneSpec = SceneSpec()) -> Dataset:
    """Scenes for every split; indices run over splits in the given order"""
    splits: Dict[str, List[LabeledScene]] = {}
    index = 0
    for split, count in split_counts.items():
        splits[split] = [generate_scene(derive_seed(dataset_seed, index + k), spec) for k in range(count)]
        index += count
    return Dataset(splits)


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(image.transpose(1, 2, 0) * 255.0).clip(0, 255).astype(np.uint8)


def _encode_ppm(image: np.ndarray) -> bytes:
    from io import BytesIO
    buffer = BytesIO()
    Image.fromarray(_to_uint8(image)).save(buffer, format='PPM')
    return buffer.getvalue()


def write_dataset(directory: str, dataset: Dataset, meta: Optional[dict] = None):
    """Persist every split; scene files are written in index order

    Args:
        directory: Target directory (created if missing)
        dataset: Scenes by split
        meta: Extra generation parameters stored in meta.json
    """
    os.makedirs(os.path.join(directory, 'images'), exist_ok=True)
    os.makedirs(os.path.join(directory, 'labels'), exist_ok=True)
    index_lines = []
    seeds = []
    index = 0
    for split, scenes in dataset.splits.items():
        for scene in scenes:
            stem = f"{index:05d}"
            run_manager.atomic_write_bytes(os.path.join(directory, 'images', f'{stem}.ppm'), _encode_ppm(scene.image))
            label_text = ''.join(box.to_line() + '\n' for box in scene.boxes)
            run_manager.atomic_write_text(os.path.join(directory, 'labels', f'{stem}.txt'), label_text)
            index_lines.append(f"{stem} {split}\n")
            seeds.append(scene.seed)
            index += 1
    run_manager.atomic_write_text(os.path.join(directory, 'index.txt'), ''.join(index_lines))
    meta = dict(meta or {})
    meta['seeds'] = seeds
    run_manager.atomic_write_text(os.path.join(directory, 'meta.json'), json.dumps(meta, indent=2, sort_keys=True))
    logger.info(f"Wrote {index} scenes to {directory}")


def parse_annotations(path: str) -> List[BoundingBox]:
    """Read one label file

    Raises:
        AnnotationParseError: On a malformed line, naming file and line
    """
    boxes = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 5:
                raise AnnotationParseError(path, line_number, f"expected 5 fields, got {len(parts)}: {line.strip()!r}")
            try:
                class_id = int(parts[0])
                coords = [float(p) for p in parts[1:]]
            except ValueError:
                raise AnnotationParseError(path, line_number, f"non-numeric field in {line.strip()!r}") from None
            try:
                boxes.append(BoundingBox(class_id, *coords))
            except DataError as e:
                raise AnnotationParseError(path, line_number, str(e)) from None
    return boxes


def read_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert('RGB'), dtype=np.float32)
    except OSError as e:
        raise DataError(f"cannot read image {path}: {e}") from None
    return pixels.transpose(2, 0, 1) / np.float32(255.0)


def read_dataset(directory: str, splits: Optional[Sequence[str]] = None) -> Dataset:
    """Load a dataset directory

    Args:
        directory: Dataset root written by write_dataset
        splits: Splits to load, all when None

    Raises:
        DataError: If the directory, index or a requested split is missing
    """
    index_path = os.path.join(directory, 'index.txt')
    if not os.path.exists(index_path):
        raise DataError(f"dataset index not found: {index_path}")
    seeds: List[Optional[int]] = []
    meta_path = os.path.join(directory, 'meta.json')
    if os.path.exists(meta_path):
        with open(meta_path, 'r', encoding='utf-8') as f:
            seeds = json.load(f).get('seeds', [])
    loaded: Dict[str, List[LabeledScene]] = {}
    with open(index_path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise AnnotationParseError(index_path, line_number, f"expected 'NNNNN split', got {line.strip()!r}")
            stem, split = parts
            if splits is not None and split not in splits:
                continue
            image = read_image(os.path.join(directory, 'images', f'{stem}.ppm'))
            boxes = parse_annotations(os.path.join(directory, 'labels', f'{stem}.txt'))
            seed = seeds[int(stem)] if int(stem) < len(seeds) else None
            loaded.setdefault(split, []).append(LabeledScene(image=image, boxes=boxes, seed=seed))
    for split in splits or []:
        if split not in loaded:
            raise DataError(f"split '{split}' not found in {directory}")
    return Dataset(loaded)


def prepare_dataset(directory: str, dataset_seed: int, split_counts: Dict[str, int],
                    spec: SceneSpec = SceneSpec()) -> Dataset:
    """Reuse a dataset directory generated with the same parameters, else regenerate it"""
    meta = {'dataset_seed': dataset_seed, 'split_counts': dict(split_counts),
            'size': spec.size, 'num_classes': spec.num_classes, 'max_occlusion': MAX_OCCLUSION}
    meta_path = os.path.join(directory, 'meta.json')
    if os.path.exists(meta_path):
        with open(meta_path, 'r', encoding='utf-8') as f:
            stored = json.load(f)
        if all(stored.get(k) == v for k, v in meta.items()):
            logger.info(f"Reusing dataset at {directory}")
            return read_dataset(directory, list(split_counts))
        logger.warning(f"Dataset at {directory} was generated with other parameters; regenerating")
    dataset = generate_dataset(dataset_seed, split_counts, spec)
    write_dataset(directory, dataset, meta)
    return dataset
