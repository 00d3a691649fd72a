#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Experiment configuration - flat TOML file plus --set overrides

Every run is described by one ExperimentConfig. Its normalized text (sorted
"key = value" lines) is written into the run directory and its SHA-256 is
the config hash stored in reports.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

# TOML support
try:
    import tomllib  # Python 3.11+
except ImportError:
    try:
        import tomli as tomllib  # Python < 3.11
    except ImportError:
        tomllib = None

from errors import ConfigError
from feature_matching import parse_stage_subset
from imitation_losses import AUTO, ImitationConfig
from toy_detector import DetectorSpec, check_student_ratio

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = 'hgd_config.toml'
ADAPTER_INITS = ('uniform', 'identity')


@dataclass(frozen=True)
class ExperimentConfig:
    # dataset
    dataset_seed: int = 0
    train_count: int = 400
    test_count: int = 100
    image_size: int = 64
    dataset_dir: str = 'data/synth'
    # detector
    teacher_widths: Tuple[int, ...] = (16, 32, 64, 64)
    blocks_per_stage: int = 2
    head_stages: Tuple[int, ...] = (1, 2, 3)
    num_classes: int = 2
    anchor_scales: Tuple[float, ...] = (3.0, 3.0, 3.0)
    # imitation
    metric: str = 'cosine'
    macro_weight: str = 'stage_variance'
    micro_weight: str = 'gt_mask'
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: Union[float, str] = AUTO
    epsilon: float = 1e-8
    feature_selection: bool = True
    stage_subset: str = 'all'
    max_resample_ratio: float = 4.0
    adapter_init: str = 'uniform'
    # schedule
    epochs: int = 24
    warmup_epochs: Union[int, str] = AUTO
    distill_epoch_factor: float = 1.25
    learning_rate: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay_factor: float = 0.1
    lr_milestone_fractions: Tuple[float, ...] = (0.6, 0.8)
    batch_size: int = 16
    # run
    run_seed: int = 0
    eval_every: int = 1
    score_threshold: float = 0.05
    nms_iou: float = 0.45
    output_dir: str = 'runs'

    def __post_init__(self):
        self.validate()

    # -- derived settings -------------------------------------------------

    def teacher_spec(self) -> DetectorSpec:
        return DetectorSpec(widths=self.teacher_widths, blocks_per_stage=self.blocks_per_stage,
                            head_stages=self.head_stages, num_classes=self.num_classes,
                            anchor_scales=self.anchor_scales, image_size=self.image_size)

    def student_spec(self) -> DetectorSpec:
        return self.teacher_spec().halved()

    def imitation_config(self) -> ImitationConfig:
        return ImitationConfig(metric=self.metric, macro_weight=self.macro_weight, micro_weight=self.micro_weight,
                               gamma=self.gamma, lambda1=self.lambda1, lambda2=self.lambda2, epsilon=self.epsilon)

    @property
    def distill_epochs(self) -> int:
        return max(1, round(self.epochs * self.distill_epoch_factor))

    def warmup_for(self, epochs: int) -> int:
        """Warmup length of a run with the given epoch count (10% when 'auto')"""
        if self.warmup_epochs == AUTO:
            return max(1, round(0.1 * epochs)) if epochs > 1 else 0
        return int(self.warmup_epochs)

    def milestones_for(self, epochs: int) -> List[int]:
        """LR decay epochs; fractions that collapse onto the same epoch or reach the end are merged away"""
        return sorted({round(f * epochs) for f in self.lr_milestone_fractions} & set(range(1, epochs)))

    @property
    def split_counts(self) -> Dict[str, int]:
        return {'train': self.train_count, 'test': self.test_count}

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    # -- validation ---------------------------------------------------------

    def validate(self):
        """Raise ConfigError on the first broken invariant"""
        for name in ('train_count', 'test_count', 'epochs', 'batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError(f"lr_decay_factor must be in (0, 1], got {self.lr_decay_factor}")
        if self.distill_epoch_factor <= 0:
            raise ConfigError(f"distill_epoch_factor must be > 0, got {self.distill_epoch_factor}")
        if not 0 <= self.score_threshold < 1:
            raise ConfigError(f"score_threshold must be in [0, 1), got {self.score_threshold}")
        if not 0 < self.nms_iou <= 1:
            raise ConfigError(f"nms_iou must be in (0, 1], got {self.nms_iou}")
        if self.max_resample_ratio < 1:
            raise ConfigError(f"max_resample_ratio must be >= 1, got {self.max_resample_ratio}")
        if self.adapter_init not in ADAPTER_INITS:
            raise ConfigError(f"adapter_init must be one of {', '.join(ADAPTER_INITS)}, got '{self.adapter_init}'")
        if self.warmup_epochs != AUTO and (isinstance(self.warmup_epochs, str) or self.warmup_epochs < 0):
            raise ConfigError(f"warmup_epochs must be an integer >= 0 or '{AUTO}', got {self.warmup_epochs!r}")
        fractions = list(self.lr_milestone_fractions)
        if any(not 0 < f < 1 for f in fractions) or any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ConfigError(f"lr_milestone_fractions must be strictly increasing inside (0, 1), got {fractions}")
        for epochs in (self.epochs, self.distill_epochs):
            warmup = self.warmup_for(epochs)
            if warmup > 0 and warmup >= epochs:
                raise ConfigError(f"warmup_epochs ({warmup}) must be smaller than epochs ({epochs})")
        teacher = self.teacher_spec()
        check_student_ratio(teacher, teacher.halved())
        self.imitation_config()
        parse_stage_subset(self.stage_subset, teacher.num_stages, teacher.head_stages)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _expected_kind(name: str) -> str:
    default = ExperimentConfig.__dataclass_fields__[name].default
    if name in ('lambda2', 'warmup_epochs'):
        return 'number_or_auto'
    if isinstance(default, bool):
        return 'bool'
    if isinstance(default, tuple):
        return 'float_list' if default and isinstance(default[0], float) else 'int_list'
    return type(default).__name__


def _coerce(name: str, value: Any) -> Any:
    kind = _expected_kind(name)
    bad = ConfigError(f"Config key '{name}' expects {kind.replace('_', ' ')}, got {value!r}")
    if kind == 'bool':
        if not isinstance(value, bool):
            raise bad
        return value
    if kind == 'int':
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad
        return value
    if kind == 'float':
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        return float(value)
    if kind == 'str':
        if not isinstance(value, str):
            raise bad
        return value
    if kind in ('int_list', 'float_list'):
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise bad
        if kind == 'int_list':
            if any(not isinstance(v, int) for v in value):
                raise bad
            return tuple(value)
        return tuple(float(v) for v in value)
    # number or 'auto'
    if value == AUTO:
        return AUTO
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise bad
    if name == 'warmup_epochs':
        if not float(value).is_integer():
            raise bad
        return int(value)
    return value


def parse_override(text: str) -> Tuple[str, Any]:
    """Split 'key=value'; the value is read as a TOML value, else kept as a string"""
    if '=' not in text:
        raise ConfigError(f"Override '{text}' must have the form key=value")
    key, raw = (part.strip() for part in text.split('=', 1))
    if not key:
        raise ConfigError(f"Override '{text}' has an empty key")
    try:
        value = tomllib.loads(f"value = {raw}")['value'] if tomllib is not None else raw
    except Exception:
        value = raw
    return key, value


def config_from_mapping(values: Dict[str, Any]) -> ExperimentConfig:
    """Build a config from raw key/value pairs

    Raises:
        ConfigError: On unknown keys, nested tables or values of the wrong type
    """
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, value in values.items():
        if isinstance(value, dict):
            raise ConfigError(f"Config must be flat key = value pairs; '{key}' is a table")
        if key not in known:
            raise ConfigError(f"Unknown config key '{key}'. Valid keys: {', '.join(sorted(known))}")
        kwargs[key] = _coerce(key, value)
    return ExperimentConfig(**kwargs)


def load_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Load configuration from a TOML file and apply --set overrides

    Args:
        path: Config file; hgd_config.toml when omitted and present, built-in
            defaults otherwise
        overrides: 'key=value' strings applied after the file

    Raises:
        ConfigError: If the file is missing or unreadable, or a value is invalid
    """
    overrides = list(overrides)
    values: Dict[str, Any] = {}
    if path is None and os.path.exists(DEFAULT_CONFIG_FILE):
        path = DEFAULT_CONFIG_FILE
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"Configuration file '{path}' not found")
        if tomllib is None:
            raise ConfigError("tomli not installed. Install it with: pip install tomli")
        try:
            with open(path, 'rb') as f:
                values = tomllib.load(f)
        except Exception as e:
            raise ConfigError(f"Could not load config '{path}': {e}") from None
    for text in overrides:
        key, value = parse_override(text)
        values[key] = value
    config = config_from_mapping(values)
    logger.debug(f"Loaded config from {path or 'built-in defaults'} with {len(overrides)} overrides")
    return config


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_toml_value(v) for v in value) + ']'
    return repr(value)


def normalized_text(config: ExperimentConfig) -> str:
    """Sorted 'key = value' lines; valid TOML that loads back to the same config"""
    return ''.join(f"{key} = {_toml_value(value)}\n" for key, value in sorted(config.to_dict().items()))


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(normalized_text(config).encode('utf-8')).hexdigest()
