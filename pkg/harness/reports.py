#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Training reports and curve export.
"""

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import run_manager
from errors import InvariantError, ReportParseError

CURVE_METRICS = ('L_c', 'L_l', 'L_i', 'total', 'lr', 'map')
_RECORD_KEYS = {'L_c': 'l_c', 'L_l': 'l_l', 'L_i': 'l_i', 'total': 'total', 'lr': 'lr', 'map': 'map'}


@dataclass
class EpochRecord:
    """Epoch means of the loss components, the learning rate and test mAP"""
    epoch: int
    lr: float
    l_c: float
    l_l: float
    l_i: float
    total: float
    lambda2: float = 0.0
    map: Optional[float] = None

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, _RECORD_KEYS[name])


@dataclass
class TrainReport:
    run_name: str
    kind: str
    epochs: int
    config_hash: str
    records: List[EpochRecord] = field(default_factory=list)
    checkpoint: str = ''
    parameter_count: int = 0
    final_map: Optional[float] = None
    lambda2: Optional[float] = None
    teacher_hash: Optional[str] = None
    teacher_parameter_count: Optional[int] = None

    def check(self):
        if len(self.records) != self.epochs:
            raise InvariantError(f"report {self.run_name}: {len(self.records)} epoch records for {self.epochs} epochs")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, path: str):
        run_manager.atomic_write_json(path, self.to_dict())


def report_from_dict(data: Dict[str, Any], source: str = '<dict>') -> TrainReport:
    try:
        records = [EpochRecord(**r) for r in data['records']]
        fields = {k: v for k, v in data.items() if k != 'records'}
        return TrainReport(records=records, **fields)
    except (KeyError, TypeError) as e:
        raise ReportParseError(f"{source}: malformed report ({e})") from None


def load_report(path: str) -> TrainReport:
    """Read a report.json

    Raises:
        ReportParseError: If the file is not valid JSON or lacks report fields
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ReportParseError(f"cannot read report {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ReportParseError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ReportParseError(f"{path}: expected a JSON object")
    return report_from_dict(data, path)


def _unique_names(names: Sequence[str]) -> List[str]:
    used = set()
    unique = []
    for name in names:
        candidate, n = name, 1
        while candidate in used:
            n += 1
            candidate = f"{name}#{n}"
        used.add(candidate)
        unique.append(candidate)
    return unique


def curves_csv(reports: Sequence[TrainReport]) -> str:
    """Long format: run, epoch, metric, value (empty when not measured)"""
    if not reports:
        raise ReportParseError("export-curves needs at least one report")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['run', 'epoch', 'metric', 'value'])
    for name, report in zip(_unique_names([r.run_name for r in reports]), reports):
        for record in report.records:
            for metric in CURVE_METRICS:
                value = record.metric(metric)
                writer.writerow([name, record.epoch, metric, '' if value is None else repr(float(value))])
    return buffer.getvalue()


def expand_report_paths(paths: Sequence[str]) -> List[str]:
    """Replace each output directory by the report.json of every run under it

    Raises:
        ReportParseError: If a directory holds no finished run
    """
    expanded = []
    for path in paths:
        if not os.path.isdir(path):
            expanded.append(path)
            continue
        runs = run_manager.list_runs(path)
        if not runs:
            raise ReportParseError(f"no {run_manager.REPORT_FILE} found under {path}")
        expanded.extend(os.path.join(path, *run.split('/'), run_manager.REPORT_FILE) for run in runs)
    return expanded


def export_curves(report_paths: Sequence[str], out_path: str) -> int:
    """Merge reports into one curves CSV

    Args:
        report_paths: report.json files or output directories to search for runs

    Returns:
        Number of data rows written
    """
    reports = [load_report(p) for p in expand_report_paths(report_paths)]
    text = curves_csv(reports)
    run_manager.atomic_write_text(out_path, text)
    return text.count('\n') - 1
