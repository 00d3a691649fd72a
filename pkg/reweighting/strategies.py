#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Macro (stage) and micro (spatial) weighting strategies.

All weights are plain numpy arrays computed from detached values.
Micro strategies return (N, H, W) maps per pair; macro strategies return
an (N, S) array over the pairs.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError
from tensor_core import Tensor, channel_stats, no_grad
from tensor_core.ops import sigmoid_values

from .registry import MACRO, MICRO, register_strategy


def focal_stage_weights(stage_losses: Sequence[float], gamma: float) -> np.ndarray:
    """u_s = (1 - p_s)^gamma with p_s the share of stage s in the total loss

    All-zero losses give uniform weights.
    """
    losses = np.asarray(stage_losses, dtype=np.float64)
    if np.any(losses < 0):
        raise DimensionError(f"focal_stage_weights: negative stage loss in {losses.tolist()}")
    total = losses.sum()
    if total == 0:
        return np.ones_like(losses)
    return (1.0 - losses / total) ** gamma


def nearest_resize(maps: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resize of (..., H, W) maps using cell centers"""
    in_h, in_w = maps.shape[-2:]
    rows = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.int64), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.int64), in_w - 1)
    return maps[..., rows[:, None], cols[None, :]]


def spatial_stat_weights(student_raw: Tensor, mode: str, target_hw: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """sigmoid of the per-location channel mean or variance

    Args:
        student_raw: Student feature before the adapter, shape (N, C, H, W)
        mode: 'mean' or 'variance'
        target_hw: Matched teacher size when the pair was resampled

    Returns:
        Array of shape (N, H, W), or (N, *target_hw)
    """
    with no_grad():
        stats = channel_stats(student_raw.detach(), mode).data[:, 0].astype(np.float64)
    v = sigmoid_values(stats)
    if target_hw is not None and tuple(target_hw) != v.shape[-2:]:
        v = nearest_resize(v, *target_hw)
    return v


def stage_weight_from_spatial(v) -> np.ndarray:
    """Mean of a spatial weight map; per image for (N, H, W) input"""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim < 2 or v.shape[-1] == 0 or v.shape[-2] == 0:
        raise DimensionError(f"stage_weight_from_spatial: empty or non-spatial map of shape {v.shape}")
    return v.mean(axis=(-2, -1))


def gt_mask_weights(boxes: Sequence, height: int, width: int) -> np.ndarray:
    """1 for cells whose center lies inside any box, else 0

    Args:
        boxes: Boxes with normalized x1, y1, x2, y2
        height, width: Grid size

    Returns:
        Array of shape (height, width)
    """
    cy = (np.arange(height) + 0.5) / height
    cx = (np.arange(width) + 0.5) / width
    mask = np.zeros((height, width), dtype=np.float64)
    for box in boxes:
        inside_y = (cy >= box.y1) & (cy <= box.y2)
        inside_x = (cx >= box.x1) & (cx <= box.x2)
        mask[np.ix_(inside_y, inside_x)] = 1.0
    return mask


def _target_hw(pair) -> Optional[Tuple[int, int]]:
    return tuple(pair.teacher.shape[2:]) if pair.resampled else None


def _map_shape(pair) -> Tuple[int, int, int]:
    n, _c, h, w = pair.teacher.shape
    return n, h, w


# ---------------------------------------------------------------------------
# Micro strategies: (pair, boxes, config) -> (N, H, W)
# ---------------------------------------------------------------------------

@register_strategy('none', category=MICRO)
def uniform_spatial(pair, boxes, config) -> np.ndarray:
    """Every location weighs 1"""
    return np.ones(_map_shape(pair))


@register_strategy('spatial_mean', category=MICRO)
def spatial_mean(pair, boxes, config) -> np.ndarray:
    return spatial_stat_weights(pair.student_raw, 'mean', _target_hw(pair))


@register_strategy('spatial_variance', category=MICRO)
def spatial_variance(pair, boxes, config) -> np.ndarray:
    return spatial_stat_weights(pair.student_raw, 'variance', _target_hw(pair))


@register_strategy('gt_mask', category=MICRO)
def gt_mask(pair, boxes, config) -> np.ndarray:
    """Foreground cells of the ground-truth boxes"""
    n, h, w = _map_shape(pair)
    if len(boxes) != n:
        raise DimensionError(f"gt_mask: {len(boxes)} box lists for a batch of {n}")
    return np.stack([gt_mask_weights(image_boxes, h, w) for image_boxes in boxes])


# ---------------------------------------------------------------------------
# Macro strategies: (pairs, stage_losses (N, S), config) -> (N, S)
# ---------------------------------------------------------------------------

@register_strategy('none', category=MACRO)
def uniform_stage(pairs, stage_losses, config) -> np.ndarray:
    """Every stage weighs 1"""
    return np.ones(np.shape(stage_losses))


@register_strategy('focal', category=MACRO)
def focal(pairs, stage_losses, config) -> np.ndarray:
    """Down-weight the stages that are already imitated well"""
    return np.stack([focal_stage_weights(row, config.gamma) for row in np.asarray(stage_losses)])


def _stat_stage_weights(pairs, mode) -> np.ndarray:
    return np.stack([stage_weight_from_spatial(spatial_stat_weights(p.student_raw, mode)) for p in pairs], axis=1)


@register_strategy('stage_mean', category=MACRO)
def stage_mean(pairs, stage_losses, config) -> np.ndarray:
    return _stat_stage_weights(pairs, 'mean')


@register_strategy('stage_variance', category=MACRO)
def stage_variance(pairs, stage_losses, config) -> np.ndarray:
    return _stat_stage_weights(pairs, 'variance')
