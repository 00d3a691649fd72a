#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Stage correspondence between student and teacher features.

Features are grouped into stages by spatial size, the last feature of every
stage is selected, stage k of the student is paired with stage k of the
teacher, and each student feature is mapped to the teacher's shape by a
1x1 adapter (plus a bilinear resize when resolutions differ). Adapters live
in an AdapterBank on a side branch and are dropped at deployment.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, DimensionError, OrderingError
from tensor_core import Tensor, bilinear_resize, conv2d, get_default_dtype

logger = logging.getLogger(__name__)

DEFAULT_MAX_RESAMPLE_RATIO = 4.0
SELECT_LAST = 'last'
SELECT_ALL = 'all'


@dataclass
class StageFeatureSet:
    """Features in forward order with the stage id of each"""
    features: List[Tensor]
    stage_ids: List[int]

    @property
    def num_stages(self) -> int:
        return self.stage_ids[-1] + 1 if self.stage_ids else 0

    def members(self, stage: int) -> List[int]:
        """Forward-order indices of the features in one stage"""
        return [k for k, s in enumerate(self.stage_ids) if s == stage]


def group_stages(features: Sequence[Tensor]) -> StageFeatureSet:
    """Assign stage ids by spatial size

    Consecutive features with equal HxW share a stage; a size change starts
    the next one.

    Raises:
        OrderingError: If the list is empty or a spatial size grows
    """
    if not features:
        raise OrderingError("group_stages: empty feature list")
    stage_ids = [0]
    previous = features[0].shape[2:]
    for k, feature in enumerate(features[1:], start=1):
        size = feature.shape[2:]
        if size[0] > previous[0] or size[1] > previous[1]:
            raise OrderingError(
                f"group_stages: feature {k} has spatial size {size[0]}x{size[1]}, "
                f"larger than the preceding {previous[0]}x{previous[1]}")
        stage_ids.append(stage_ids[-1] + (size != previous))
        previous = size
    return StageFeatureSet(list(features), stage_ids)


def select_last(stages: StageFeatureSet) -> List[Tensor]:
    """Final feature of each stage, in stage order"""
    if not stages.features:
        raise OrderingError("select_last: empty stage set")
    return [stages.features[stages.members(s)[-1]] for s in range(stages.num_stages)]


@dataclass(frozen=True)
class PlannedPair:
    """One student/teacher correspondence

    Indices point into the list the plan gathers from: the per-stage
    selection for SELECT_LAST plans, the full feature list for SELECT_ALL.
    """
    key: str
    stage: int
    student_index: int
    teacher_index: int
    student_shape: Tuple[int, ...]
    teacher_shape: Tuple[int, ...]
    resample: bool = False


@dataclass
class MatchPlan:
    pairs: List[PlannedPair]
    dropped: List[str] = field(default_factory=list)
    excluded: List[int] = field(default_factory=list)
    selection: str = SELECT_LAST
    num_stages: int = 0
    subset: str = 'all'

    @property
    def stages(self) -> List[int]:
        return sorted({p.stage for p in self.pairs})

    def gather(self, student: StageFeatureSet, teacher: StageFeatureSet) -> List[Tuple[PlannedPair, Tensor, Tensor]]:
        """Pick the planned student and teacher tensors out of a forward pass"""
        if self.selection == SELECT_LAST:
            student_list, teacher_list = select_last(student), select_last(teacher)
        else:
            student_list, teacher_list = student.features, teacher.features
        return [(p, student_list[p.student_index], teacher_list[p.teacher_index]) for p in self.pairs]

    def to_text(self) -> str:
        """Human-readable summary printed at run start"""
        lines = [f"match plan: selection={self.selection} subset={self.subset} stages={self.num_stages}"]
        for p in self.pairs:
            tag = ' resample-to-teacher' if p.resample else ''
            lines.append(f"  pair {p.key}: stage {p.stage} student[{p.student_index}] {_fmt(p.student_shape)}"
                         f" -> teacher[{p.teacher_index}] {_fmt(p.teacher_shape)}{tag}")
        for stage in self.excluded:
            lines.append(f"  excluded stage {stage} (subset '{self.subset}')")
        for reason in self.dropped:
            lines.append(f"  dropped: {reason}")
        if not self.pairs:
            lines.append("  (no pairs: imitation disabled)")
        return '\n'.join(lines) + '\n'


def _fmt(shape: Tuple[int, ...]) -> str:
    return 'x'.join(str(d) for d in shape[1:])


def _resample_ratio(student_shape, teacher_shape) -> float:
    ratios = [s / t for s, t in zip(student_shape[2:], teacher_shape[2:])]
    return max(max(r, 1.0 / r) for r in ratios)


def _plan_pair(key, stage, s_idx, t_idx, student, teacher, max_ratio, dropped) -> Optional[PlannedPair]:
    resample = tuple(student.shape[2:]) != tuple(teacher.shape[2:])
    if resample:
        ratio = _resample_ratio(student.shape, teacher.shape)
        if ratio > max_ratio:
            reason = (f"pair {key}: resample ratio {ratio:.2f} between {_fmt(student.shape)} and "
                      f"{_fmt(teacher.shape)} exceeds {max_ratio:g}")
            logger.warning(reason)
            dropped.append(reason)
            return None
    return PlannedPair(key=key, stage=stage, student_index=s_idx, teacher_index=t_idx,
                       student_shape=tuple(student.shape), teacher_shape=tuple(teacher.shape), resample=resample)


def build_match_plan(student_stages: Sequence[Tensor], teacher_stages: Sequence[Tensor],
                     max_ratio: float = DEFAULT_MAX_RESAMPLE_RATIO) -> MatchPlan:
    """Pair student stage k with teacher stage k

    Args:
        student_stages: One selected feature per student stage
        teacher_stages: One selected feature per teacher stage
        max_ratio: Largest per-axis resolution ratio still resampled

    Returns:
        MatchPlan; trailing extra stages and extreme-ratio pairs are recorded
        as dropped
    """
    if not student_stages or not teacher_stages:
        raise DimensionError("build_match_plan: both stage lists must be nonempty")
    common = min(len(student_stages), len(teacher_stages))
    dropped: List[str] = []
    pairs = []
    for k in range(common):
        pair = _plan_pair(f"s{k}", k, k, k, student_stages[k], teacher_stages[k], max_ratio, dropped)
        if pair is not None:
            pairs.append(pair)
    for side, stages in (('student', student_stages), ('teacher', teacher_stages)):
        for k in range(common, len(stages)):
            reason = f"{side} stage {k} has no counterpart"
            logger.warning(reason)
            dropped.append(reason)
    return MatchPlan(pairs=pairs, dropped=dropped, selection=SELECT_LAST,
                     num_stages=max(len(student_stages), len(teacher_stages)))


def build_feature_plan(student: StageFeatureSet, teacher: StageFeatureSet,
                       max_ratio: float = DEFAULT_MAX_RESAMPLE_RATIO) -> MatchPlan:
    """Pair every feature of each common stage by position (feature selection off)"""
    common = min(student.num_stages, teacher.num_stages)
    dropped: List[str] = []
    pairs = []
    for stage in range(common):
        s_members, t_members = student.members(stage), teacher.members(stage)
        for pos, (s_idx, t_idx) in enumerate(zip(s_members, t_members)):
            pair = _plan_pair(f"s{stage}f{pos}", stage, s_idx, t_idx,
                              student.features[s_idx], teacher.features[t_idx], max_ratio, dropped)
            if pair is not None:
                pairs.append(pair)
        if len(s_members) != len(t_members):
            reason = f"stage {stage}: {abs(len(s_members) - len(t_members))} features have no counterpart"
            logger.warning(reason)
            dropped.append(reason)
    for side, stages in (('student', student), ('teacher', teacher)):
        for k in range(common, stages.num_stages):
            reason = f"{side} stage {k} has no counterpart"
            logger.warning(reason)
            dropped.append(reason)
    return MatchPlan(pairs=pairs, dropped=dropped, selection=SELECT_ALL,
                     num_stages=max(student.num_stages, teacher.num_stages))


def parse_stage_subset(subset: str, num_stages: int, head_stages: Sequence[int] = ()) -> List[int]:
    """Resolve a stage-subset selector to sorted stage ids

    Selectors: all, none, early (first half), late (second half), heads,
    or comma-separated indices and a-b ranges such as "0,2-3".

    Raises:
        ConfigError: On an unknown token or an index outside the stage range
    """
    text = subset.strip().lower()
    half = num_stages // 2
    named = {
        'all': list(range(num_stages)),
        'none': [],
        'early': list(range(half)),
        'late': list(range(half, num_stages)),
        'heads': sorted(set(head_stages)),
    }
    if text in named:
        return named[text]
    chosen = set()
    for token in text.split(','):
        token = token.strip()
        try:
            if '-' in token:
                lo, hi = (int(x) for x in token.split('-', 1))
                if lo > hi:
                    raise ValueError
                chosen.update(range(lo, hi + 1))
            else:
                chosen.add(int(token))
        except ValueError:
            raise ConfigError(f"Invalid stage subset token '{token}' in '{subset}'; "
                              f"use all, none, early, late, heads, indices or a-b ranges") from None
    out_of_range = sorted(s for s in chosen if not 0 <= s < num_stages)
    if out_of_range:
        raise ConfigError(f"Stage subset '{subset}' names stages {out_of_range}; valid stages are 0-{num_stages - 1}")
    return sorted(chosen)


def filter_plan(plan: MatchPlan, subset: str, head_stages: Sequence[int] = ()) -> MatchPlan:
    """Keep only pairs whose stage is in the subset"""
    keep = set(parse_stage_subset(subset, plan.num_stages, head_stages))
    excluded = sorted({p.stage for p in plan.pairs} - keep)
    return replace(plan, pairs=[p for p in plan.pairs if p.stage in keep], excluded=excluded, subset=subset)


class AdapterBank:
    """Trainable 1x1 convolutions, one per planned pair, keyed by pair key"""

    def __init__(self, kernels: Optional[Dict[str, Tensor]] = None):
        self._kernels: Dict[str, Tensor] = dict(kernels or {})

    @classmethod
    def create(cls, plan: MatchPlan, rng: np.random.Generator, init: str = 'uniform') -> 'AdapterBank':
        """Build adapters for every pair of the plan

        Args:
            plan: Match plan
            rng: Generator for the uniform init
            init: 'uniform' (bound 1/sqrt(fan_in)) or 'identity'
        """
        kernels = {}
        for pair in plan.pairs:
            c_student, c_teacher = pair.student_shape[1], pair.teacher_shape[1]
            if init == 'uniform':
                bound = 1.0 / math.sqrt(c_student)
                values = rng.uniform(-bound, bound, size=(c_teacher, c_student))
            elif init == 'identity':
                values = np.eye(c_teacher, c_student)
            else:
                raise ConfigError(f"Unknown adapter init '{init}', expected 'uniform' or 'identity'")
            kernels[pair.key] = Tensor(values.reshape(c_teacher, c_student, 1, 1).astype(get_default_dtype()),
                                       requires_grad=True, name=f"adapter.{pair.key}")
        return cls(kernels)

    def __contains__(self, key: str) -> bool:
        return key in self._kernels

    def __len__(self) -> int:
        return len(self._kernels)

    def kernel(self, key: str) -> Tensor:
        if key not in self._kernels:
            raise ConfigError(f"No adapter for pair '{key}'; adapters exist for {sorted(self._kernels)}")
        return self._kernels[key]

    def parameters(self) -> Dict[str, Tensor]:
        return {f"adapter.{key}": self._kernels[key] for key in sorted(self._kernels)}


@dataclass
class MatchedPair:
    """Adapted student feature next to its teacher target"""
    student_adapted: Tensor
    teacher: Tensor
    stage: int
    student_raw: Tensor
    resampled: bool = False
    key: str = ''


def adapt(pair: PlannedPair, student_raw: Tensor, teacher: Tensor, adapters: AdapterBank) -> MatchedPair:
    """Map a student feature to the teacher's shape

    Raises:
        ConfigError: If the bank has no adapter for the pair
        DimensionError: If the adapted shape still differs from the teacher's
    """
    kernel = adapters.kernel(pair.key)
    adapted = conv2d(student_raw, kernel)
    if pair.resample:
        adapted = bilinear_resize(adapted, teacher.shape[2], teacher.shape[3])
    if adapted.shape != teacher.shape:
        raise DimensionError(f"adapt: pair {pair.key} adapted shape {adapted.shape} != teacher shape {teacher.shape}")
    return MatchedPair(student_adapted=adapted, teacher=teacher, stage=pair.stage,
                       student_raw=student_raw, resampled=pair.resample, key=pair.key)
