#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Distillation state of one run: frozen teacher, match plan, adapters and
the lambda2 schedule.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import InvariantError
from experiment_config import ExperimentConfig
from feature_matching import (
    AdapterBank, MatchPlan, adapt, build_feature_plan, build_match_plan, filter_plan, group_stages, select_last,
)
from imitation_losses import (
    StageLossBreakdown, compute_loss_maps, create_metric, per_image_stage_losses, reweighted_aggregate, total_loss,
)
from reweighting import WeightMaps, compose_weights
from tensor_core import Tensor, no_grad
from toy_detector import DetectorModel

logger = logging.getLogger(__name__)

ADAPTER_SEED_KEY = 7919


class Distiller:
    """Hands-on imitation of every matched teacher stage

    Args:
        teacher: Trained teacher; its parameters are frozen here
        student: Student being trained
        config: Experiment configuration
        epochs: Length of the distillation run (warmup is derived from it)
    """

    def __init__(self, teacher: DetectorModel, student: DetectorModel, config: ExperimentConfig, epochs: int):
        self.teacher = teacher
        self.student = student
        self.config = config
        self.imitation = config.imitation_config()
        self.metric = create_metric(self.imitation)
        self.warmup_epochs = config.warmup_for(epochs)
        for param in teacher.parameters().values():
            param.requires_grad = False
        self.teacher_hash = teacher.state_hash()
        self.plan = self._build_plan()
        rng = np.random.default_rng([config.run_seed, ADAPTER_SEED_KEY])
        self.adapters = AdapterBank.create(self.plan, rng, init=config.adapter_init)
        self.lambda2: Optional[float] = None if self.imitation.auto_lambda2 else float(self.imitation.lambda2)
        self._epoch_sums = np.zeros(3)
        self._epoch_steps = 0

    def _build_plan(self) -> MatchPlan:
        size = self.config.image_size
        blank = np.zeros((1, 3, size, size), dtype=np.float32)
        with no_grad():
            student_set = group_stages(self.student.forward_collect(blank)[0])
            teacher_set = group_stages(self.teacher.forward_collect(blank)[0])
        if self.config.feature_selection:
            plan = build_match_plan(select_last(student_set), select_last(teacher_set), self.config.max_resample_ratio)
        else:
            plan = build_feature_plan(student_set, teacher_set, self.config.max_resample_ratio)
        return filter_plan(plan, self.config.stage_subset, self.config.head_stages)

    def parameters(self):
        return self.adapters.parameters()

    def _calibrate(self, l_c: float, l_l: float, l_i: float, source: str):
        if l_i > 0:
            self.lambda2 = float((l_c + self.imitation.lambda1 * l_l) / l_i)
        else:
            self.lambda2 = 1.0
            logger.warning("Imitation loss was zero while calibrating lambda2; using 1.0")
        logger.info(f"lambda2 auto-scaled to {self.lambda2:.6g} from {source} and frozen")

    def matched_pairs(self, student_features: Sequence[Tensor], images: np.ndarray) -> List:
        with no_grad():
            teacher_features, _ = self.teacher.forward_collect(images)
        gathered = self.plan.gather(group_stages(student_features), group_stages(teacher_features))
        return [adapt(planned, s, t, self.adapters) for planned, s, t in gathered]

    def weights(self, pairs: Sequence, boxes: Sequence[Sequence]) -> Tuple[WeightMaps, List[Tensor]]:
        loss_maps = compute_loss_maps(pairs, self.metric)
        return compose_weights(self.imitation, pairs, per_image_stage_losses(loss_maps), boxes), loss_maps

    def loss(self, student_features: Sequence[Tensor], images: np.ndarray, boxes: Sequence[Sequence],
             l_c: Tensor, l_l: Tensor, epoch: int) -> Tuple[Tensor, StageLossBreakdown]:
        """Total objective of one step and its breakdown

        During warmup lambda2 is 0: L_i is still computed and logged but
        stays out of the backward pass.
        """
        lambda1 = self.imitation.lambda1
        if not self.plan.pairs:
            total = total_loss(l_c, l_l, None, lambda1, 0.0)
            breakdown = StageLossBreakdown(l_c=l_c.item(), l_l=l_l.item(), l_i=0.0, lambda1=lambda1,
                                           lambda2=0.0, total=total.item())
            return total, breakdown
        pairs = self.matched_pairs(student_features, images)
        weights, loss_maps = self.weights(pairs, boxes)
        l_i, skipped = reweighted_aggregate(pairs, self.metric, weights.u, weights.v, loss_maps)
        if epoch >= self.warmup_epochs and self.lambda2 is None:
            # no warmup to calibrate from
            self._calibrate(l_c.item(), l_l.item(), l_i.item(), 'the first step')
        lambda2 = 0.0 if epoch < self.warmup_epochs else self.lambda2
        total = total_loss(l_c, l_l, l_i, lambda1, lambda2)
        self._epoch_sums += (l_c.item(), l_l.item(), l_i.item())
        self._epoch_steps += 1
        stage_losses = per_image_stage_losses(loss_maps).mean(axis=0)
        breakdown = StageLossBreakdown(
            l_c=l_c.item(), l_l=l_l.item(), l_i=l_i.item(), lambda1=lambda1, lambda2=lambda2, total=total.item(),
            stage_losses=[float(x) for x in stage_losses],
            stage_weights=[float(x) for x in weights.u.mean(axis=0)],
            stage_keys=[p.key for p in pairs],
            skipped=skipped,
        )
        return total, breakdown

    def end_epoch(self, epoch: int):
        """Calibrate lambda2 after the last warmup epoch, then reset the running sums"""
        if self.lambda2 is None and self.plan.pairs and epoch == self.warmup_epochs - 1 and self._epoch_steps:
            l_c, l_l, l_i = self._epoch_sums / self._epoch_steps
            self._calibrate(l_c, l_l, l_i, f'warmup epoch {epoch}')
        self._epoch_sums = np.zeros(3)
        self._epoch_steps = 0

    def verify_teacher(self):
        """Raise InvariantError if the teacher changed during the run"""
        current = self.teacher.state_hash()
        if current != self.teacher_hash:
            raise InvariantError(f"teacher parameters changed during distillation ({self.teacher_hash[:12]} -> {current[:12]})")
