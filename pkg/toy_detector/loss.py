#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Classification and localization losses with hard negative mining.
"""

from typing import Tuple

import numpy as np

from tensor_core import Tensor, ops, reshape, smooth_l1, softmax_cross_entropy

from .model import DetectionOutput
from .targets import Targets

NEGATIVE_RATIO = 3
NEGATIVES_WITHOUT_POSITIVES = 8


def mine_negatives(ce_values: np.ndarray, labels: np.ndarray,
                   ratio: int = NEGATIVE_RATIO, fallback: int = NEGATIVES_WITHOUT_POSITIVES) -> np.ndarray:
    """Selection mask of positives plus the hardest negatives of each image

    Args:
        ce_values: Per-anchor cross-entropy, shape (N, A)
        labels: Per-anchor labels, shape (N, A)

    Returns:
        Boolean mask (N, A)
    """
    selected = labels > 0
    for n in range(labels.shape[0]):
        negatives = np.flatnonzero(labels[n] == 0)
        num_pos = int(selected[n].sum())
        k = min(ratio * num_pos if num_pos else fallback, negatives.size)
        if k == 0:
            continue
        order = np.argsort(-ce_values[n, negatives], kind='stable')
        selected[n, negatives[order[:k]]] = True
    return selected


def detection_loss(outputs: DetectionOutput, targets: Targets) -> Tuple[Tensor, Tensor]:
    """(L_c, L_l) for a batch

    L_c is the mean cross-entropy over positives and mined negatives.
    L_l is smooth L1 averaged over positive anchors and the four coordinates,
    0 when the batch holds no positives.
    """
    n, a, k = outputs.logits.shape
    labels = targets.labels.reshape(n * a)
    ce = softmax_cross_entropy(reshape(outputs.logits, (n * a, k)), labels)
    selected = mine_negatives(ce.data.reshape(n, a), targets.labels).reshape(n * a)
    ce_weights = (selected / selected.sum()).astype(ce.dtype)
    l_c = ops.sum(ops.mul(ce, ce_weights))

    positive = targets.positive.reshape(n * a)
    num_pos = int(positive.sum())
    if num_pos == 0:
        return l_c, Tensor(0.0, dtype=outputs.offsets.dtype)
    per_coord = smooth_l1(reshape(outputs.offsets, (n * a, 4)), targets.offsets.reshape(n * a, 4))
    loc_weights = np.repeat(positive[:, None] / (4.0 * num_pos), 4, axis=1).astype(per_coord.dtype)
    l_l = ops.sum(ops.mul(per_coord, loc_weights))
    return l_c, l_l
