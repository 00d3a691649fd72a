#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Macro stage weights and micro spatial weights for the imitation loss.
"""

from .registry import MACRO, MICRO, StrategyRegistry, get_registry, register_strategy
from .strategies import (
    focal_stage_weights,
    gt_mask_weights,
    nearest_resize,
    spatial_stat_weights,
    stage_weight_from_spatial,
)
from .compose import WeightMaps, compose_weights, export_weight_maps

__all__ = [
    'MACRO',
    'MICRO',
    'StrategyRegistry',
    'WeightMaps',
    'compose_weights',
    'export_weight_maps',
    'focal_stage_weights',
    'get_registry',
    'gt_mask_weights',
    'nearest_resize',
    'register_strategy',
    'spatial_stat_weights',
    'stage_weight_from_spatial',
]
