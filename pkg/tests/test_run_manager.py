#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for run directory management
"""

import json
import os

import pytest

from errors import ConfigError
from run_manager import (
    REPORT_FILE, append_jsonl, atomic_write_json, atomic_write_text, ensure_run_dir, get_run_dir, list_runs,
    validate_run_name,
)


@pytest.mark.parametrize('name', ['teacher', 'student-2', 'ablate/all/seed0', 'run_v1.5'])
def test_valid_run_names(name):
    assert validate_run_name(name)


@pytest.mark.parametrize('name', ['', 'a//b', '../escape', 'a/./b', 'with space', 'semi;colon', '/abs'])
def test_invalid_run_names(name, tmp_path):
    assert not validate_run_name(name)
    with pytest.raises(ConfigError):
        get_run_dir(str(tmp_path), name)


def test_nested_run_dir(tmp_path):
    run_dir = ensure_run_dir(str(tmp_path), 'ablate/late/seed1')
    assert run_dir == os.path.join(str(tmp_path), 'ablate', 'late', 'seed1')
    assert os.path.isdir(run_dir)


def test_exclusive_refuses_non_empty_dir(tmp_path):
    run_dir = ensure_run_dir(str(tmp_path), 'distill', exclusive=True)
    assert ensure_run_dir(str(tmp_path), 'distill', exclusive=True) == run_dir
    atomic_write_text(os.path.join(run_dir, 'config.toml'), 'epochs = 1\n')
    with pytest.raises(ConfigError, match='not empty'):
        ensure_run_dir(str(tmp_path), 'distill', exclusive=True)
    assert ensure_run_dir(str(tmp_path), 'distill') == run_dir


def test_atomic_writes_leave_no_temporaries(tmp_path):
    path = str(tmp_path / 'sub' / 'eval.json')
    atomic_write_json(path, {'b': 1, 'a': [1, 2]})
    atomic_write_json(path, {'a': 2})
    with open(path, encoding='utf-8') as f:
        assert json.load(f) == {'a': 2}
    assert os.listdir(tmp_path / 'sub') == ['eval.json']


def test_list_runs_finds_reports(tmp_path):
    assert list_runs(str(tmp_path / 'missing')) == []
    for name in ('teacher', 'ablate/all/seed0', 'ablate/none/seed0'):
        atomic_write_json(os.path.join(ensure_run_dir(str(tmp_path), name), REPORT_FILE), {})
    ensure_run_dir(str(tmp_path), 'unfinished')
    assert list_runs(str(tmp_path)) == ['ablate/all/seed0', 'ablate/none/seed0', 'teacher']


def test_append_jsonl(tmp_path):
    path = str(tmp_path / 'steps.jsonl')
    append_jsonl(path, {'step': 0, 'total': 1.5})
    append_jsonl(path, {'step': 1, 'total': 1.25})
    with open(path, encoding='utf-8') as f:
        records = [json.loads(line) for line in f]
    assert [r['step'] for r in records] == [0, 1]
