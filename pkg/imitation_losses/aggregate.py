#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Stage aggregation of imitation losses and the multi-task objective.

With a batch of N images every formula is evaluated per image and the
result is averaged over the batch.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionError, InvariantError, NonFiniteError
from tensor_core import Tensor, as_tensor, ops, scale

from .base import ImitationMetric

logger = logging.getLogger(__name__)

Scalar = Union[Tensor, float]


def compute_loss_maps(pairs: Sequence, metric: ImitationMetric) -> List[Tensor]:
    """Per-location loss map (N, H, W) of every matched pair, in pair order"""
    return [metric.loss_map(p.student_adapted, p.teacher) for p in pairs]


def per_image_stage_losses(loss_maps: Sequence[Tensor]) -> np.ndarray:
    """Spatial mean of each loss map per image, shape (N, S), detached"""
    return np.stack([m.data.astype(np.float64).mean(axis=(1, 2)) for m in loss_maps], axis=1)


def aggregate_imitation(pairs: Sequence, metric: ImitationMetric,
                        loss_maps: Optional[Sequence[Tensor]] = None) -> Tensor:
    """Sum over stages of the spatially averaged imitation loss

    Raises:
        DimensionError: On an empty pair list or a shape mismatch inside a pair
    """
    if not pairs:
        raise DimensionError("aggregate_imitation: empty pair list")
    loss_maps = compute_loss_maps(pairs, metric) if loss_maps is None else loss_maps
    total = None
    for loss_map in loss_maps:
        term = ops.mean(loss_map)
        total = term if total is None else total + term
    return total


def _broadcast_u(u, batch: int, stages: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = np.broadcast_to(u, (batch, stages))
    if u.shape != (batch, stages):
        raise DimensionError(f"reweighted_aggregate: stage weights of shape {u.shape}, expected ({batch}, {stages})")
    return u


def reweighted_aggregate(pairs: Sequence, metric: ImitationMetric, u, v: Sequence,
                         loss_maps: Optional[Sequence[Tensor]] = None) -> Tuple[Tensor, List[Tuple[int, int]]]:
    """Macro/micro re-weighted aggregation

    For image n and pair s the term is u[n, s] / sum(v_s[n]) * sum(v_s[n] * L_s[n]).
    Weights are constants: no gradient flows into u or v.

    Args:
        pairs: Matched pairs
        metric: Imitation metric
        u: Stage weights, shape (N, S) or (S,)
        v: Per pair spatial weights, each (N, H_s, W_s) or (H_s, W_s)
        loss_maps: Precomputed loss maps, computed when omitted

    Returns:
        (loss, skipped) where skipped lists (image, pair index) whose spatial
        weights sum to zero; those terms contribute 0
    """
    if not pairs:
        raise DimensionError("reweighted_aggregate: empty pair list")
    loss_maps = compute_loss_maps(pairs, metric) if loss_maps is None else loss_maps
    if len(v) != len(loss_maps):
        raise DimensionError(f"reweighted_aggregate: {len(v)} spatial weight maps for {len(loss_maps)} pairs")
    batch = loss_maps[0].shape[0]
    u = _broadcast_u(u, batch, len(loss_maps))
    skipped: List[Tuple[int, int]] = []
    total = None
    for s, (loss_map, v_s) in enumerate(zip(loss_maps, v)):
        v_s = np.asarray(v_s, dtype=np.float64)
        if v_s.ndim == 2:
            v_s = np.broadcast_to(v_s, loss_map.shape)
        if v_s.shape != loss_map.shape:
            raise DimensionError(f"reweighted_aggregate: pair {s} spatial weights {v_s.shape} vs loss map {loss_map.shape}")
        if np.any(v_s < 0) or np.any(u[:, s] < 0):
            raise InvariantError(f"reweighted_aggregate: negative weights for pair {s}")
        mass = v_s.sum(axis=(1, 2))
        for n in np.flatnonzero(mass == 0):
            skipped.append((int(n), s))
        safe_mass = np.where(mass > 0, mass, 1.0)
        coefficients = np.where(mass > 0, u[:, s] / safe_mass, 0.0)[:, None, None] * v_s / batch
        term = ops.sum(ops.mul(loss_map, coefficients.astype(loss_map.dtype)))
        total = term if total is None else total + term
    if skipped:
        logger.debug(f"Skipped {len(skipped)} (image, stage) terms with all-zero spatial weights")
    return total, skipped


def _check_finite(name: str, value: Scalar) -> float:
    number = value.item() if isinstance(value, Tensor) else float(value)
    if not math.isfinite(number):
        raise NonFiniteError(f"loss component {name} is not finite ({number})")
    return number


def total_loss(l_c: Scalar, l_l: Scalar, l_i: Optional[Scalar], lambda1: float, lambda2: float) -> Tensor:
    """L = L_c + lambda1 * L_l + lambda2 * L_i

    A zero lambda2 leaves L_i out of the graph entirely.

    Raises:
        NonFiniteError: Naming the first non-finite component
    """
    _check_finite('L_c', l_c)
    _check_finite('L_l', l_l)
    if l_i is not None:
        _check_finite('L_i', l_i)
    l_c = as_tensor(l_c)
    total = l_c + scale(as_tensor(l_l, like=l_c), lambda1)
    if l_i is not None and lambda2 != 0:
        total = total + scale(as_tensor(l_i, like=l_c), lambda2)
    return total


@dataclass
class StageLossBreakdown:
    """Loss bookkeeping of one optimization step"""
    l_c: float
    l_l: float
    l_i: float
    lambda1: float
    lambda2: float
    total: float
    stage_losses: List[float] = field(default_factory=list)
    stage_weights: List[float] = field(default_factory=list)
    stage_keys: List[str] = field(default_factory=list)
    skipped: List[Tuple[int, int]] = field(default_factory=list)

    def check(self, rel_tol: float = 1e-5):
        """Assert total == L_c + lambda1 L_l + lambda2 L_i"""
        expected = self.l_c + self.lambda1 * self.l_l + self.lambda2 * self.l_i
        if not math.isclose(self.total, expected, rel_tol=rel_tol, abs_tol=1e-6):
            raise InvariantError(f"loss total {self.total} != components sum {expected}")

    def to_record(self, step: int, epoch: int) -> dict:
        return {
            'step': step,
            'epoch': epoch,
            'L_c': self.l_c,
            'L_l': self.l_l,
            'L_i': self.l_i,
            'lambda1': self.lambda1,
            'lambda2': self.lambda2,
            'total': self.total,
            'stage_losses': dict(zip(self.stage_keys, self.stage_losses)),
            'u': dict(zip(self.stage_keys, self.stage_weights)),
            'skipped': [list(item) for item in self.skipped],
        }
