#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Training, distillation, ablation and reporting behind hgd_cli.py.
"""

from .reports import (
    CURVE_METRICS, EpochRecord, TrainReport, curves_csv, expand_report_paths, export_curves, load_report,
)
from .distiller import Distiller
from .trainer import Trainer, evaluate_model
from .experiments import (
    ablate_stages,
    ablation_tables,
    distill,
    evaluate,
    export_heatmaps,
    load_teacher,
    prepare_data,
    stage_heatmaps,
    train_student,
    train_teacher,
)

__all__ = [
    'CURVE_METRICS',
    'Distiller',
    'EpochRecord',
    'TrainReport',
    'Trainer',
    'ablate_stages',
    'ablation_tables',
    'curves_csv',
    'distill',
    'evaluate',
    'evaluate_model',
    'expand_report_paths',
    'export_curves',
    'export_heatmaps',
    'load_report',
    'load_teacher',
    'prepare_data',
    'stage_heatmaps',
    'train_student',
    'train_teacher',
]
