#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Error hierarchy shared by every module of the kit.

Each error carries the exit code the CLI reports for it.
"""


class HGDError(Exception):
    """Base class for all kit errors"""
    exit_code = 1


class ConfigError(HGDError, ValueError):
    """Invalid configuration, strategy name or command-line usage"""
    exit_code = 2


class DataError(HGDError, IOError):
    """Unreadable or malformed dataset, report or checkpoint"""
    exit_code = 3


class AnnotationParseError(DataError):
    """Malformed annotation line"""

    def __init__(self, path, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}: line {line_number}: {message}")


class ReportParseError(DataError):
    """Malformed TrainReport file"""


class CheckpointError(DataError):
    """Checkpoint that cannot be loaded (bad magic, spec hash mismatch)"""


class InvariantError(HGDError, RuntimeError):
    """An internal invariant was violated; training must abort"""
    exit_code = 4


class NonFiniteError(InvariantError):
    """A tensor or loss component became NaN or infinite"""


class DimensionError(InvariantError, ValueError):
    """Incompatible tensor shapes"""


class OrderingError(DimensionError):
    """Feature spatial sizes increase in forward order"""
