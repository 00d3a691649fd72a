#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Architecture description of the toy single-shot detector.

Every stage is a 2x2 max pool followed by ``blocks_per_stage`` 3x3 conv +
relu blocks, so a 64x64 input gives stage sizes 32, 16, 8, 4. Detection
heads sit on the last feature of each head stage.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Tuple

from errors import ConfigError

MAX_STUDENT_PARAMETER_RATIO = 0.30


@dataclass(frozen=True)
class DetectorSpec:
    widths: Tuple[int, ...] = (16, 32, 64, 64)
    blocks_per_stage: int = 2
    head_stages: Tuple[int, ...] = (1, 2, 3)
    num_classes: int = 2
    anchor_scales: Tuple[float, ...] = (3.0, 3.0, 3.0)
    image_size: int = 64
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, 'widths', tuple(int(w) for w in self.widths))
        object.__setattr__(self, 'head_stages', tuple(int(s) for s in self.head_stages))
        object.__setattr__(self, 'anchor_scales', tuple(float(s) for s in self.anchor_scales))
        if not self.widths or min(self.widths) < 1:
            raise ConfigError(f"Stage widths must be positive, got {list(self.widths)}")
        if self.blocks_per_stage < 1:
            raise ConfigError(f"blocks_per_stage must be >= 1, got {self.blocks_per_stage}")
        if not self.head_stages or not set(self.head_stages) <= set(range(self.num_stages)):
            raise ConfigError(f"head_stages {list(self.head_stages)} must be a nonempty subset of 0-{self.num_stages - 1}")
        if list(self.head_stages) != sorted(set(self.head_stages)):
            raise ConfigError(f"head_stages must be strictly increasing, got {list(self.head_stages)}")
        if len(self.anchor_scales) != len(self.head_stages):
            raise ConfigError(f"{len(self.anchor_scales)} anchor scales for {len(self.head_stages)} head stages")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.image_size % (2 ** self.num_stages):
            raise ConfigError(f"image_size {self.image_size} is not divisible by 2^{self.num_stages}")

    @property
    def num_stages(self) -> int:
        return len(self.widths)

    def stride(self, stage: int) -> int:
        return 2 ** (stage + 1)

    def feature_sizes(self) -> List[int]:
        return [self.image_size // self.stride(k) for k in range(self.num_stages)]

    def halved(self) -> 'DetectorSpec':
        """Student spec: every stage width halved, rounding up"""
        return replace(self, widths=tuple(math.ceil(w / 2) for w in self.widths))

    def parameter_count(self) -> int:
        count = 0
        in_channels = self.in_channels
        for width in self.widths:
            for _ in range(self.blocks_per_stage):
                count += in_channels * width * 9 + width
                in_channels = width
        for stage in self.head_stages:
            count += self.widths[stage] * 9 * (self.num_classes + 1 + 4) + self.num_classes + 1 + 4
        return count

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'DetectorSpec':
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))

    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode('utf-8')).hexdigest()


def check_student_ratio(teacher: DetectorSpec, student: DetectorSpec,
                        max_ratio: float = MAX_STUDENT_PARAMETER_RATIO) -> float:
    """Parameter ratio student/teacher; raises ConfigError at or above max_ratio"""
    ratio = student.parameter_count() / teacher.parameter_count()
    if ratio >= max_ratio:
        raise ConfigError(f"Student has {ratio:.1%} of the teacher's parameters; must stay below {max_ratio:.0%}")
    return ratio
