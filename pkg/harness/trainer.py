#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Epoch loop shared by teacher, baseline student and distillation runs.
"""

import logging
import os
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

import run_manager
from evaluation import EvalResult, mean_ap
from experiment_config import ExperimentConfig
from imitation_losses import StageLossBreakdown, total_loss
from synth_data import LabeledScene
from tensor_core import SGD, StepDecay, Tensor, no_grad
from toy_detector import AnchorGrid, DetectorModel, Targets, assign_targets, detection_loss, infer_decode

from .distiller import Distiller
from .reports import EpochRecord

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 50

StepCallback = Callable[[int, int, StageLossBreakdown], None]
EpochCallback = Callable[[EpochRecord], None]


def evaluate_model(model: DetectorModel, scenes: Sequence[LabeledScene], config: ExperimentConfig,
                   iou_thresholds: Sequence[float] = (0.5,)) -> EvalResult:
    """Decode, NMS and mAP over a list of scenes"""
    anchors = AnchorGrid.for_spec(model.spec)
    detections = []
    with no_grad():
        for start in range(0, len(scenes), EVAL_BATCH_SIZE):
            images = np.stack([s.image for s in scenes[start:start + EVAL_BATCH_SIZE]])
            outputs = model.forward(images)
            for image_dets in infer_decode(outputs, anchors, config.score_threshold, config.nms_iou, first_image_id=start):
                detections.extend(image_dets)
    return mean_ap(detections, [s.boxes for s in scenes], list(range(model.spec.num_classes)), iou_thresholds)


class Trainer:
    """SGD training of one detector, optionally under a Distiller

    Args:
        model: Detector being trained
        config: Experiment configuration
        epochs: Number of epochs of this run
        run_dir: Directory receiving steps.jsonl (None to skip the step log)
        distiller: Imitation state for distillation runs
        on_step: Called with (step, epoch, breakdown) after every update
        on_epoch: Called with each EpochRecord
    """

    def __init__(self, model: DetectorModel, config: ExperimentConfig, epochs: int, run_dir: Optional[str] = None,
                 distiller: Optional[Distiller] = None, on_step: Optional[StepCallback] = None,
                 on_epoch: Optional[EpochCallback] = None):
        self.model = model
        self.config = config
        self.epochs = epochs
        self.run_dir = run_dir
        self.distiller = distiller
        self.on_step = on_step
        self.on_epoch = on_epoch
        self.anchors = AnchorGrid.for_spec(model.spec)
        parameters: Dict[str, Tensor] = dict(model.parameters())
        if distiller is not None:
            parameters.update(distiller.parameters())
        self.optimizer = SGD(parameters, momentum=config.momentum, weight_decay=config.weight_decay)
        self.schedule = StepDecay(config.learning_rate, config.lr_decay_factor, config.milestones_for(epochs))
        self.step = 0

    def _targets(self, scenes: Sequence[LabeledScene]) -> List[Targets]:
        return [assign_targets(self.anchors, scene.boxes) for scene in scenes]

    def _step(self, images: np.ndarray, boxes: List, targets: Targets, epoch: int, lr: float) -> StageLossBreakdown:
        self.optimizer.zero_grad()
        features, outputs = self.model.forward_collect(images)
        l_c, l_l = detection_loss(outputs, targets)
        if self.distiller is not None:
            loss, breakdown = self.distiller.loss(features, images, boxes, l_c, l_l, epoch)
        else:
            lambda1 = self.config.lambda1
            loss = total_loss(l_c, l_l, None, lambda1, 0.0)
            breakdown = StageLossBreakdown(l_c=l_c.item(), l_l=l_l.item(), l_i=0.0, lambda1=lambda1,
                                           lambda2=0.0, total=loss.item())
        breakdown.check()
        loss.backward()
        self.optimizer.step(lr)
        return breakdown

    def fit(self, train: Sequence[LabeledScene], test: Sequence[LabeledScene] = ()) -> List[EpochRecord]:
        """Train for the configured epochs

        Returns:
            One EpochRecord per epoch
        """
        targets = self._targets(train)
        steps_path = os.path.join(self.run_dir, run_manager.STEPS_FILE) if self.run_dir else None
        records = []
        for epoch in range(self.epochs):
            lr = self.schedule.lr_at(epoch)
            order = np.random.default_rng([self.config.run_seed, epoch]).permutation(len(train))
            sums = np.zeros(4)
            lambda2 = 0.0
            batches = 0
            for start in range(0, len(order), self.config.batch_size):
                batch = order[start:start + self.config.batch_size]
                images = np.stack([train[k].image for k in batch])
                boxes = [train[k].boxes for k in batch]
                batch_targets = Targets(np.stack([targets[k].labels for k in batch]),
                                        np.stack([targets[k].offsets for k in batch]))
                breakdown = self._step(images, boxes, batch_targets, epoch, lr)
                sums += (breakdown.l_c, breakdown.l_l, breakdown.l_i, breakdown.total)
                lambda2 = breakdown.lambda2
                batches += 1
                self.step += 1
                if steps_path:
                    run_manager.append_jsonl(steps_path, breakdown.to_record(self.step, epoch))
                if self.on_step:
                    self.on_step(self.step, epoch, breakdown)
            if self.distiller is not None:
                self.distiller.end_epoch(epoch)
            means = sums / max(batches, 1)
            record = EpochRecord(epoch=epoch, lr=lr, l_c=float(means[0]), l_l=float(means[1]), l_i=float(means[2]),
                                 total=float(means[3]), lambda2=float(lambda2))
            if test and self._should_eval(epoch):
                record.map = evaluate_model(self.model, test, self.config).map
            logger.info(f"epoch {epoch + 1}/{self.epochs} lr={lr:.4g} L_c={record.l_c:.4f} L_l={record.l_l:.4f} "
                        f"L_i={record.l_i:.4f} total={record.total:.4f}"
                        + (f" mAP={record.map:.4f}" if record.map is not None else ''))
            records.append(record)
            if self.on_epoch:
                self.on_epoch(record)
        return records

    def _should_eval(self, epoch: int) -> bool:
        last = epoch == self.epochs - 1
        every = self.config.eval_every
        return last or (every > 0 and (epoch + 1) % every == 0)
