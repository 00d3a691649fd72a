#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Shared fixtures for the test suite.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from experiment_config import ExperimentConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: end-to-end runs, enabled with HGD_RUN_SLOW=1')


def pytest_collection_modifyitems(config, items):
    if os.getenv('HGD_RUN_SLOW') == '1':
        return
    skip = pytest.mark.skip(reason='set HGD_RUN_SLOW=1 to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tiny_config(root, **changes) -> ExperimentConfig:
    """Two-epoch runs on a handful of 32x32 scenes under root"""
    values = dict(
        train_count=8,
        test_count=4,
        image_size=32,
        dataset_dir=os.path.join(str(root), 'data'),
        output_dir=os.path.join(str(root), 'runs'),
        epochs=2,
        batch_size=4,
        lr_milestone_fractions=(0.5,),
        learning_rate=0.01,
    )
    values.update(changes)
    return ExperimentConfig(**values)


@pytest.fixture
def tiny_config(tmp_path):
    return make_tiny_config(tmp_path)
