#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Experiment entry points behind the CLI commands

Each training command owns one run directory under config.output_dir:

    config.toml      normalized effective configuration
    steps.jsonl      one JSON record per optimizer step
    match_plan.txt   distillation runs only
    checkpoint.hgd   final weights (student only for distillation)
    eval.json        test-split evaluation of the final weights
    report.json      per-epoch TrainReport
"""

import csv
import io
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

import run_manager
from errors import ConfigError, DataError
from evaluation import EvalResult
from experiment_config import ExperimentConfig, config_hash, normalized_text
from feature_matching import group_stages, parse_stage_subset, select_last
from reweighting import export_weight_maps
from synth_data import Dataset, LabeledScene, SceneSpec, prepare_dataset, read_image
from tensor_core import no_grad
from toy_detector import DetectorModel, load_checkpoint, save_checkpoint

from .distiller import Distiller
from .reports import TrainReport
from .trainer import Trainer, evaluate_model

logger = logging.getLogger(__name__)

ABLATION_FILE = 'ablation.csv'
ABLATION_TABLE_FILE = 'ablation_table.csv'


def prepare_data(config: ExperimentConfig) -> Dataset:
    """Generate or reuse the synthetic dataset described by the config"""
    spec = SceneSpec(size=config.image_size, num_classes=config.num_classes)
    return prepare_dataset(config.dataset_dir, config.dataset_seed, config.split_counts, spec)


def _start_run(config: ExperimentConfig, run_name: str, exclusive: bool = False) -> str:
    run_dir = run_manager.ensure_run_dir(config.output_dir, run_name, exclusive=exclusive)
    run_manager.atomic_write_text(os.path.join(run_dir, run_manager.CONFIG_FILE), normalized_text(config))
    run_manager.atomic_write_text(os.path.join(run_dir, run_manager.STEPS_FILE), '')
    logger.info(f"Run '{run_name}' in {run_dir} (config {config_hash(config)[:12]})")
    return run_dir


def _finish_run(config: ExperimentConfig, run_name: str, kind: str, run_dir: str, model: DetectorModel,
                trainer: Trainer, records: List, test: Sequence[LabeledScene], **extra) -> TrainReport:
    checkpoint = os.path.join(run_dir, run_manager.CHECKPOINT_FILE)
    save_checkpoint(checkpoint, model)
    result = evaluate_model(model, test, config)
    run_manager.atomic_write_text(os.path.join(run_dir, run_manager.EVAL_FILE), result.to_json())
    report = TrainReport(run_name=run_name, kind=kind, epochs=trainer.epochs, config_hash=config_hash(config),
                         records=records, checkpoint=checkpoint, parameter_count=model.parameter_count(),
                         final_map=result.map, **extra)
    report.check()
    report.save(os.path.join(run_dir, run_manager.REPORT_FILE))
    logger.info(f"Run '{run_name}' finished: mAP@0.5 = {result.map:.4f}, {report.parameter_count} parameters")
    return report


def _train_plain(config: ExperimentConfig, kind: str, run_name: str, exclusive: bool = False) -> TrainReport:
    spec = config.teacher_spec() if kind == 'teacher' else config.student_spec()
    data = prepare_data(config)
    run_dir = _start_run(config, run_name, exclusive)
    model = DetectorModel(spec, seed=config.run_seed)
    trainer = Trainer(model, config, config.epochs, run_dir=run_dir)
    records = trainer.fit(data.split('train'), data.split('test'))
    return _finish_run(config, run_name, kind, run_dir, model, trainer, records, data.split('test'))


def train_teacher(config: ExperimentConfig, run_name: str = 'teacher') -> TrainReport:
    """Train the full-width detector on ground truth only"""
    return _train_plain(config, 'teacher', run_name)


def train_student(config: ExperimentConfig, run_name: str = 'student') -> TrainReport:
    """Train the half-width baseline student on ground truth only"""
    return _train_plain(config, 'student', run_name)


def load_teacher(config: ExperimentConfig, checkpoint: str) -> DetectorModel:
    """Load a teacher checkpoint that must match the configured teacher architecture"""
    return load_checkpoint(checkpoint, expected_spec=config.teacher_spec())


def distill(config: ExperimentConfig, teacher_checkpoint: str, run_name: str = 'distill',
            export_weights: bool = False, exclusive: bool = False) -> TrainReport:
    """Train a student under hands-on imitation of a frozen teacher

    Args:
        config: Experiment configuration
        teacher_checkpoint: Checkpoint written by train_teacher
        run_name: Run directory name under config.output_dir
        export_weights: Also write the final u / v weight grids of the first
            training image as CSV under <run>/weights
        exclusive: Refuse a non-empty run directory

    Raises:
        CheckpointError: If the teacher checkpoint does not match the config
        InvariantError: If the teacher parameters changed during the run
    """
    teacher = load_teacher(config, teacher_checkpoint)
    data = prepare_data(config)
    run_dir = _start_run(config, run_name, exclusive)
    student = DetectorModel(config.student_spec(), seed=config.run_seed)
    epochs = config.distill_epochs
    distiller = Distiller(teacher, student, config, epochs)
    plan_text = distiller.plan.to_text()
    logger.info(f"Match plan:\n{plan_text}")
    run_manager.atomic_write_text(os.path.join(run_dir, run_manager.PLAN_FILE), plan_text)
    trainer = Trainer(student, config, epochs, run_dir=run_dir, distiller=distiller)
    records = trainer.fit(data.split('train'), data.split('test'))
    distiller.verify_teacher()
    if export_weights:
        _export_weights(distiller, student, data.split('train')[:1], os.path.join(run_dir, 'weights'))
    return _finish_run(config, run_name, 'distill', run_dir, student, trainer, records, data.split('test'),
                       lambda2=distiller.lambda2, teacher_hash=distiller.teacher_hash,
                       teacher_parameter_count=teacher.parameter_count())


def _export_weights(distiller: Distiller, student: DetectorModel, scenes: Sequence[LabeledScene], out_dir: str):
    if not distiller.plan.pairs or not scenes:
        logger.warning("Nothing to export: the match plan is empty")
        return
    images = np.stack([s.image for s in scenes])
    with no_grad():
        features, _ = student.forward_collect(images)
        pairs = distiller.matched_pairs(features, images)
        weights, _ = distiller.weights(pairs, [s.boxes for s in scenes])
    paths = export_weight_maps(weights, out_dir, [p.key for p in pairs])
    logger.info(f"Wrote {len(paths)} weight grids to {out_dir}")


# ---------------------------------------------------------------------------
# Ablation
# ---------------------------------------------------------------------------

def _subset_slug(subset: str) -> str:
    return subset.replace(',', '_').replace(' ', '')


def ablation_run_names(subsets: Sequence[str], seeds: Sequence[int], prefix: str) -> Dict[str, Dict[int, str]]:
    return {subset: {seed: f"{prefix}/{_subset_slug(subset)}/seed{seed}" for seed in seeds} for subset in subsets}


def ablation_tables(maps: Dict[str, Dict[int, float]], seeds: Sequence[int]) -> Dict[str, str]:
    """Long CSV (subset, seed, map) and a wide table with one column per subset plus a mean row"""
    subsets = list(maps)
    long_buf, wide_buf = io.StringIO(), io.StringIO()
    long_writer = csv.writer(long_buf, lineterminator='\n')
    long_writer.writerow(['subset', 'seed', 'map'])
    for subset in subsets:
        for seed in seeds:
            long_writer.writerow([subset, seed, repr(maps[subset][seed])])
    wide_writer = csv.writer(wide_buf, lineterminator='\n')
    wide_writer.writerow(['seed'] + subsets)
    for seed in seeds:
        wide_writer.writerow([seed] + [repr(maps[subset][seed]) for subset in subsets])
    wide_writer.writerow(['mean'] + [repr(float(np.mean([maps[s][seed] for seed in seeds]))) for s in subsets])
    return {ABLATION_FILE: long_buf.getvalue(), ABLATION_TABLE_FILE: wide_buf.getvalue()}


def ablate_stages(config: ExperimentConfig, teacher_checkpoint: str, subsets: Sequence[str],
                  seeds: Sequence[int], prefix: str = 'ablate') -> Dict[str, Dict[int, float]]:
    """Distill once per (stage subset, seed) and tabulate final mAP

    Raises:
        ConfigError: On an invalid or repeated subset, or if any run directory
            already holds files (checked before the first run starts)
    """
    subsets, seeds = list(subsets), list(seeds)
    if not subsets or not seeds:
        raise ConfigError("ablate-stages needs at least one subset and one seed")
    spec = config.teacher_spec()
    for subset in subsets:
        parse_stage_subset(subset, spec.num_stages, spec.head_stages)
    slugs = [_subset_slug(s) for s in subsets]
    if len(set(slugs)) != len(slugs):
        raise ConfigError(f"Stage subsets must be distinct, got {subsets}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"Seeds must be distinct, got {seeds}")
    names = ablation_run_names(subsets, seeds, prefix)
    for per_seed in names.values():
        for name in per_seed.values():
            run_dir = run_manager.get_run_dir(config.output_dir, name)
            if os.path.isdir(run_dir) and os.listdir(run_dir):
                raise ConfigError(f"Run directory '{run_dir}' already exists and is not empty; refusing to overwrite it")
    maps: Dict[str, Dict[int, float]] = {}
    for subset in subsets:
        maps[subset] = {}
        for seed in seeds:
            run_config = config.with_overrides(stage_subset=subset, run_seed=seed)
            report = distill(run_config, teacher_checkpoint, names[subset][seed], exclusive=True)
            maps[subset][seed] = float(report.final_map)
    out_dir = run_manager.get_run_dir(config.output_dir, prefix)
    for filename, text in ablation_tables(maps, seeds).items():
        run_manager.atomic_write_text(os.path.join(out_dir, filename), text)
    logger.info(f"Ablation tables written to {out_dir}")
    return maps


# ---------------------------------------------------------------------------
# Evaluation and heatmaps
# ---------------------------------------------------------------------------

def evaluate(config: ExperimentConfig, checkpoint: str, split: str = 'test',
             iou_thresholds: Sequence[float] = (0.5,), out: Optional[str] = None) -> EvalResult:
    """Decode, NMS and mAP of a checkpoint on one dataset split"""
    model = load_checkpoint(checkpoint)
    scenes = prepare_data(config).split(split)
    result = evaluate_model(model, scenes, config, iou_thresholds)
    if out:
        run_manager.atomic_write_text(out, result.to_json())
    logger.info(f"{checkpoint} on {split}: mAP@{result.iou_threshold:g} = {result.map:.4f}")
    return result


def _heatmap_image(config: ExperimentConfig, image_index: int, image_path: Optional[str], split: str) -> np.ndarray:
    if image_path:
        return read_image(image_path)
    scenes = prepare_data(config).split(split)
    if not 0 <= image_index < len(scenes):
        raise DataError(f"image index {image_index} out of range for split '{split}' ({len(scenes)} images)")
    return scenes[image_index].image


def stage_heatmaps(model: DetectorModel, image: np.ndarray, stages: Optional[Sequence[int]] = None) -> Dict[int, np.ndarray]:
    """Channel-mean activation of the last feature of each requested stage

    Raises:
        ConfigError: If a stage does not exist
    """
    valid = list(range(model.spec.num_stages))
    stages = valid if stages is None else list(stages)
    bad = [s for s in stages if s not in valid]
    if bad:
        raise ConfigError(f"Invalid stage(s) {bad}; valid stages: {', '.join(map(str, valid))}")
    with no_grad():
        features, _ = model.forward_collect(image[None])
    last = select_last(group_stages(features))
    return {s: last[s].data[0].astype(np.float64).mean(axis=0) for s in stages}


def export_heatmaps(config: ExperimentConfig, checkpoint: str, out_dir: str, image_index: int = 0,
                    image_path: Optional[str] = None, stages: Optional[Sequence[int]] = None,
                    split: str = 'test') -> List[str]:
    """Write one H x W CSV grid per stage

    Returns:
        Paths written
    """
    model = load_checkpoint(checkpoint)
    grids = stage_heatmaps(model, _heatmap_image(config, image_index, image_path, split), stages)
    paths = []
    for stage, grid in grids.items():
        buffer = io.StringIO()
        np.savetxt(buffer, grid, delimiter=',', fmt='%.9g')
        path = os.path.join(out_dir, f"stage{stage}.csv")
        run_manager.atomic_write_text(path, buffer.getvalue())
        paths.append(path)
    logger.info(f"Wrote {len(paths)} heatmaps to {out_dir}")
    return paths
