#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Combine one macro and one micro strategy into the weights of a step.
"""

import io
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

import run_manager
from errors import InvariantError
from . import strategies  # noqa: F401  registers the built-in strategies
from .registry import MACRO, MICRO, get_registry


@dataclass
class WeightMaps:
    """Stage weights u (N, S) and spatial weights v (one (N, H_s, W_s) map per pair)"""
    u: np.ndarray
    v: List[np.ndarray]
    provenance: Dict[str, str] = field(default_factory=dict)

    def validate(self):
        arrays = [self.u] + list(self.v)
        if any(not np.all(np.isfinite(a)) or np.any(a < 0) for a in arrays):
            raise InvariantError(f"weights must be finite and >= 0 ({self.provenance})")


def compose_weights(config, pairs: Sequence, stage_losses, boxes: Sequence[Sequence]) -> WeightMaps:
    """Weights for one step

    Args:
        config: ImitationConfig naming the macro and micro strategies
        pairs: Matched pairs of the step
        stage_losses: Per image unweighted stage losses, shape (N, S)
        boxes: Ground-truth boxes per image

    Raises:
        ConfigError: On an unknown strategy name
    """
    registry = get_registry()
    macro = registry.get(MACRO, config.macro_weight)
    micro = registry.get(MICRO, config.micro_weight)
    v = [micro.function(pair, boxes, config) for pair in pairs]
    u = np.asarray(macro.function(pairs, stage_losses, config), dtype=np.float64)
    weights = WeightMaps(u=u, v=v, provenance={'macro': macro.name, 'micro': micro.name})
    weights.validate()
    return weights


def _csv_grid(grid: np.ndarray) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, np.atleast_2d(grid), fmt='%.6f', delimiter=',')
    return buffer.getvalue()


def export_weight_maps(weights: WeightMaps, out_dir: str, keys: Sequence[str], image: int = 0) -> List[str]:
    """Write u and the v grids of one image as CSV files

    Returns:
        Paths written
    """
    paths = []
    u_path = os.path.join(out_dir, 'u.csv')
    header = ','.join(keys) + '\n'
    run_manager.atomic_write_text(u_path, header + _csv_grid(weights.u[image:image + 1]))
    paths.append(u_path)
    for key, grid in zip(keys, weights.v):
        path = os.path.join(out_dir, f'v_{key}.csv')
        run_manager.atomic_write_text(path, _csv_grid(grid[image]))
        paths.append(path)
    return paths
