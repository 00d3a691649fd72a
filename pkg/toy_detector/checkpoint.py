#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Versioned binary checkpoints.

Layout (little-endian):
    b"HGD1"
    u32 spec length, spec JSON (utf-8)
    64 bytes: hex SHA-256 of the spec JSON
    u32 parameter count
    per parameter: u16 name length, name, u8 ndim, u32 per dim, float32 values
"""

import json
import logging
import struct
from typing import Dict, Optional, Tuple

import numpy as np

import run_manager
from errors import CheckpointError

from .model import DetectorModel
from .spec import DetectorSpec

logger = logging.getLogger(__name__)

MAGIC = b'HGD1'


def encode_checkpoint(model: DetectorModel) -> bytes:
    spec_json = model.spec.to_json().encode('utf-8')
    chunks = [MAGIC, struct.pack('<I', len(spec_json)), spec_json,
              model.spec.spec_hash().encode('ascii'), struct.pack('<I', len(model.params))]
    for name, param in model.params.items():
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(encoded)) + encoded)
        chunks.append(struct.pack('<B', param.ndim) + struct.pack(f'<{param.ndim}I', *param.shape))
        chunks.append(np.ascontiguousarray(param.data, dtype='<f4').tobytes())
    return b''.join(chunks)


def save_checkpoint(path: str, model: DetectorModel):
    run_manager.atomic_write_bytes(path, encode_checkpoint(model))
    logger.info(f"Saved checkpoint {path} ({model.parameter_count()} parameters)")


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, path: str = '<memory>') -> Tuple[DetectorSpec, Dict[str, np.ndarray]]:
    reader = _Reader(data, path)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not an HGD1 checkpoint")
    (spec_len,) = reader.unpack('<I')
    spec_json = reader.take(spec_len).decode('utf-8')
    stored_hash = reader.take(64).decode('ascii')
    try:
        spec = DetectorSpec.from_dict(json.loads(spec_json))
    except (ValueError, TypeError) as e:
        raise CheckpointError(f"{path}: unreadable spec block: {e}") from None
    if spec.spec_hash() != stored_hash:
        raise CheckpointError(f"{path}: spec hash mismatch (stored {stored_hash[:12]}, computed {spec.spec_hash()[:12]})")
    (count,) = reader.unpack('<I')
    state = {}
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        (ndim,) = reader.unpack('<B')
        shape = reader.unpack(f'<{ndim}I')
        size = int(np.prod(shape)) if shape else 1
        state[name] = np.frombuffer(reader.take(4 * size), dtype='<f4').reshape(shape).astype(np.float32)
    if reader.offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - reader.offset} trailing bytes")
    return spec, state


def load_checkpoint(path: str, expected_spec: Optional[DetectorSpec] = None) -> DetectorModel:
    """Read a checkpoint into a new model

    Raises:
        CheckpointError: On a malformed file or a spec hash different from expected_spec's
    """
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    spec, state = decode_checkpoint(data, path)
    if expected_spec is not None and spec.spec_hash() != expected_spec.spec_hash():
        raise CheckpointError(f"{path}: checkpoint spec {spec.to_json()} does not match expected {expected_spec.to_json()}")
    model = DetectorModel(spec)
    model.load_state(state)
    return model
