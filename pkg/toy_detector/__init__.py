#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Toy single-shot detector: a teacher at full width and a student at half
width, both exposing every stage feature for distillation.
"""

from .spec import DetectorSpec, check_student_ratio
from .anchors import AnchorGrid
from .model import DetectionOutput, DetectorModel
from .targets import Targets, assign_batch, assign_targets, encode_offsets
from .loss import detection_loss, mine_negatives
from .decode import decode_boxes, infer_decode, nms
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    'AnchorGrid',
    'DetectionOutput',
    'DetectorModel',
    'DetectorSpec',
    'Targets',
    'assign_batch',
    'assign_targets',
    'check_student_ratio',
    'decode_boxes',
    'detection_loss',
    'encode_offsets',
    'infer_decode',
    'load_checkpoint',
    'mine_negatives',
    'nms',
    'save_checkpoint',
]
