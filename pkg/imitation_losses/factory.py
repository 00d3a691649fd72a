#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Imitation metric factory

Creates the metric named by the configuration.
"""

from typing import Union

from errors import ConfigError

from .base import ImitationMetric
from .config import METRICS, ImitationConfig


def create_metric(config: Union[ImitationConfig, str], epsilon: float = None) -> ImitationMetric:
    """Create a metric instance

    Args:
        config: ImitationConfig, or a bare metric name
        epsilon: Cosine denominator guard; taken from the config when omitted

    Returns:
        ImitationMetric

    Raises:
        ConfigError: If the metric name is not supported
    """
    if isinstance(config, ImitationConfig):
        name = config.metric
        epsilon = config.epsilon if epsilon is None else epsilon
    else:
        name = str(config).lower()

    if name == 'l2':
        return _create_l2_metric()
    elif name == 'cosine':
        return _create_cosine_metric(epsilon)
    else:
        raise ConfigError(f"Unsupported imitation metric '{name}'. Supported metrics: {', '.join(METRICS)}")


def _create_l2_metric() -> ImitationMetric:
    from .l2_metric import L2Metric
    return L2Metric()


def _create_cosine_metric(epsilon) -> ImitationMetric:
    from .cosine_metric import CosineMetric, DEFAULT_EPSILON
    return CosineMetric(epsilon=DEFAULT_EPSILON if epsilon is None else epsilon)
