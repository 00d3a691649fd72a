#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Imitation losses

Per-location metrics (L2, cosine), stage aggregation with optional macro and
micro weights, and the multi-task objective.
"""

from tensor_core import Tensor

from .config import ImitationConfig, METRICS, MACRO_WEIGHTS, MICRO_WEIGHTS, AUTO
from .base import ImitationMetric
from .factory import create_metric
from .aggregate import (
    StageLossBreakdown,
    aggregate_imitation,
    compute_loss_maps,
    per_image_stage_losses,
    reweighted_aggregate,
    total_loss,
)


def l2_imitation(v, z) -> Tensor:
    """Squared distance between two channel vectors"""
    return create_metric('l2').vector_loss(v, z)


def cosine_imitation(v, z, epsilon: float = 1e-8) -> Tensor:
    """One minus the cosine similarity of two channel vectors"""
    return create_metric('cosine', epsilon=epsilon).vector_loss(v, z)


__all__ = [
    'ImitationConfig',
    'ImitationMetric',
    'METRICS',
    'MACRO_WEIGHTS',
    'MICRO_WEIGHTS',
    'AUTO',
    'StageLossBreakdown',
    'aggregate_imitation',
    'compute_loss_maps',
    'cosine_imitation',
    'create_metric',
    'l2_imitation',
    'per_image_stage_losses',
    'reweighted_aggregate',
    'total_loss',
]
