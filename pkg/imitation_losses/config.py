#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Imitation settings shared by the loss and re-weighting code.
"""

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Union

from errors import ConfigError

METRICS = ('l2', 'cosine')
MACRO_WEIGHTS = ('none', 'focal', 'stage_mean', 'stage_variance')
MICRO_WEIGHTS = ('none', 'spatial_mean', 'spatial_variance', 'gt_mask')
AUTO = 'auto'


@dataclass(frozen=True)
class ImitationConfig:
    """Every knob of the imitation objective

    lambda2 may be the string 'auto': it is then fixed once at the end of
    warmup so that lambda2 * L_i matches L_c + lambda1 * L_l.
    """
    metric: str = 'cosine'
    macro_weight: str = 'none'
    micro_weight: str = 'none'
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: Union[float, str] = AUTO
    epsilon: float = 1e-8

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Raise ConfigError on an out-of-range value or unknown name"""
        if self.metric not in METRICS:
            raise ConfigError(f"Unknown imitation metric '{self.metric}'. Supported: {', '.join(METRICS)}")
        if self.macro_weight not in MACRO_WEIGHTS:
            raise ConfigError(f"Unknown macro_weight '{self.macro_weight}'. Supported: {', '.join(MACRO_WEIGHTS)}")
        if self.micro_weight not in MICRO_WEIGHTS:
            raise ConfigError(f"Unknown micro_weight '{self.micro_weight}'. Supported: {', '.join(MICRO_WEIGHTS)}")
        _non_negative('gamma', self.gamma)
        _non_negative('lambda1', self.lambda1)
        if self.lambda2 != AUTO:
            if isinstance(self.lambda2, str):
                raise ConfigError(f"lambda2 must be a number or '{AUTO}', got '{self.lambda2}'")
            _non_negative('lambda2', self.lambda2)
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def auto_lambda2(self) -> bool:
        return self.lambda2 == AUTO

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _non_negative(name: str, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be a finite number >= 0, got {value!r}")
