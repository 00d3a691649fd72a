#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
HGD CLI - train, distill, ablate and evaluate toy detectors

Usage:
    python hgd_cli.py train-teacher
    python hgd_cli.py distill --teacher runs/teacher/checkpoint.hgd
    python hgd_cli.py eval --checkpoint runs/distill/checkpoint.hgd --coco
"""

import argparse
import logging
import sys
from typing import List, Optional

import harness
from errors import HGDError
from evaluation import COCO_IOU_THRESHOLDS, DEFAULT_IOU_THRESHOLD
from experiment_config import load_config

logger = logging.getLogger('hgd_cli')

DEFAULT_SUBSETS = ['none', 'early', 'late', 'all']
DEFAULT_SEEDS = [0, 1, 2]


def _load_env():
    try:
        from dotenv import load_dotenv
        load_dotenv()
    except ImportError:
        logger.warning("python-dotenv not installed. Install it with: pip install python-dotenv")


def _configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument(
        '-c', '--config',
        default=None,
        help='Config file (default: hgd_config.toml if present, else built-in defaults)'
    )
    parser.add_argument(
        '--set',
        dest='overrides',
        action='append',
        default=[],
        metavar='KEY=VALUE',
        help='Override one config key; may be repeated'
    )
    parser.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='Debug logging'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hgd',
        description='Hands-on guidance distillation for a toy single-shot detector',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python hgd_cli.py train-teacher
  python hgd_cli.py train-student --set epochs=12
  python hgd_cli.py distill --teacher runs/teacher/checkpoint.hgd --export-weights
  python hgd_cli.py ablate-stages --teacher runs/teacher/checkpoint.hgd --subsets none early late all --seeds 0 1 2
  python hgd_cli.py eval --checkpoint runs/distill/checkpoint.hgd --split train --coco
  python hgd_cli.py export-heatmaps --checkpoint runs/distill/checkpoint.hgd --image-index 3 --stage 2 3
  python hgd_cli.py export-curves runs/student/report.json runs/distill/report.json --out curves.csv
        """
    )
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')

    for name, help_text, default_run in (('train-teacher', 'Train the full-width teacher on ground truth', 'teacher'),
                                         ('train-student', 'Train the half-width baseline student', 'student')):
        cmd = commands.add_parser(name, help=help_text)
        _add_common(cmd)
        cmd.add_argument('--run-name', default=default_run, help=f'Run directory name (default: {default_run})')

    cmd = commands.add_parser('distill', help='Train the student under hands-on imitation of a frozen teacher')
    _add_common(cmd)
    cmd.add_argument('--teacher', required=True, help='Teacher checkpoint')
    cmd.add_argument('--run-name', default='distill', help='Run directory name (default: distill)')
    cmd.add_argument('--export-weights', action='store_true', help='Write the final stage / location weights as CSV')

    cmd = commands.add_parser('ablate-stages', help='Distill once per stage subset and seed, tabulate mAP')
    _add_common(cmd)
    cmd.add_argument('--teacher', required=True, help='Teacher checkpoint')
    cmd.add_argument('--subsets', nargs='+', default=DEFAULT_SUBSETS,
                     help='Stage subsets: all, none, early, late, heads or indices like 0,2-3 (default: none early late all)')
    cmd.add_argument('--seeds', nargs='+', type=int, default=DEFAULT_SEEDS, help='Run seeds (default: 0 1 2)')
    cmd.add_argument('--run-prefix', default='ablate', help='Parent directory of the ablation runs (default: ablate)')

    cmd = commands.add_parser('eval', help='Evaluate a checkpoint on a dataset split')
    _add_common(cmd)
    cmd.add_argument('--checkpoint', required=True, help='Checkpoint to evaluate')
    cmd.add_argument('--split', default='test', help='Dataset split (default: test)')
    thresholds = cmd.add_mutually_exclusive_group()
    thresholds.add_argument('--iou', type=float, nargs='+', default=None,
                            help=f'IoU thresholds, the first one is primary (default: {DEFAULT_IOU_THRESHOLD})')
    thresholds.add_argument('--coco', action='store_true', help='Also average over IoU 0.50:0.95')
    cmd.add_argument('--out', default=None, help='Write the EvalResult JSON here as well')

    cmd = commands.add_parser('export-heatmaps', help='Write channel-mean activation grids as CSV')
    _add_common(cmd)
    cmd.add_argument('--checkpoint', required=True, help='Checkpoint to visualize')
    source = cmd.add_mutually_exclusive_group()
    source.add_argument('--image-index', type=int, default=0, help='Image index in the split (default: 0)')
    source.add_argument('--image', default=None, help='Image file instead of a dataset image')
    cmd.add_argument('--split', default='test', help='Dataset split for --image-index (default: test)')
    cmd.add_argument('--stage', type=int, nargs='+', default=None, help='Stages to export (default: all)')
    cmd.add_argument('--out-dir', default='heatmaps', help='Output directory (default: heatmaps)')

    cmd = commands.add_parser('export-curves', help='Merge reports into one long-format curves CSV')
    cmd.add_argument('reports', nargs='+', help='report.json files or output directories holding runs')
    cmd.add_argument('--out', default='curves.csv', help='Output CSV (default: curves.csv)')
    cmd.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    return parser


def run_command(args: argparse.Namespace):
    if args.command == 'export-curves':
        rows = harness.export_curves(args.reports, args.out)
        print(f"Wrote {rows} rows to {args.out}")
        return

    config = load_config(args.config, args.overrides)
    if args.command == 'train-teacher':
        report = harness.train_teacher(config, args.run_name)
        print(f"Teacher checkpoint: {report.checkpoint} (mAP {report.final_map:.4f})")
    elif args.command == 'train-student':
        report = harness.train_student(config, args.run_name)
        print(f"Student checkpoint: {report.checkpoint} (mAP {report.final_map:.4f})")
    elif args.command == 'distill':
        report = harness.distill(config, args.teacher, args.run_name, export_weights=args.export_weights)
        print(f"Student checkpoint: {report.checkpoint} (mAP {report.final_map:.4f})")
    elif args.command == 'ablate-stages':
        maps = harness.ablate_stages(config, args.teacher, args.subsets, args.seeds, args.run_prefix)
        print(harness.ablation_tables(maps, args.seeds)['ablation_table.csv'], end='')
    elif args.command == 'eval':
        if args.coco:
            thresholds = COCO_IOU_THRESHOLDS
        else:
            thresholds = tuple(args.iou) if args.iou else (DEFAULT_IOU_THRESHOLD,)
        result = harness.evaluate(config, args.checkpoint, args.split, thresholds, args.out)
        print(result.to_json(), end='')
    elif args.command == 'export-heatmaps':
        paths = harness.export_heatmaps(config, args.checkpoint, args.out_dir, image_index=args.image_index,
                                        image_path=args.image, stages=args.stage, split=args.split)
        for path in paths:
            print(path)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 0
    _configure_logging(args.verbose)
    _load_env()
    try:
        run_command(args)
    except HGDError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
