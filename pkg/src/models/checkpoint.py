"""
Checkpoint file format ("MTCK").

Layout (little endian):
    magic "MTCK" | version u16 | metadata length u32 | metadata (UTF-8 JSON)
    tensor count u32
    per tensor: name length u16 | name UTF-8 | dtype code u8 | ndim u8 | dims u32 x ndim | data
dtype codes: 0 f32, 1 f64, 2 i64. Tensors keep their own dtype, so a model
reloaded at its training precision reproduces its outputs bit for bit.
Version 1 files (no dtype code, f32 data) are still read.
Tensors are written in state_dict order; metadata keys are sorted so the same
weights and metadata always produce the same bytes.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np
import torch
from loguru import logger

from src.common.errors import CheckpointError

MAGIC = b"MTCK"
FORMAT_VERSION = 2

_HEADER = struct.Struct("<4sHI")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")

DTYPE_CODES = {torch.float32: 0, torch.float64: 1, torch.int64: 2}
_WIRE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}


@dataclass
class Checkpoint:
    metadata: Dict[str, Any]
    tensors: Dict[str, torch.Tensor]


def encode_checkpoint(state_dict: Mapping[str, torch.Tensor], metadata: Dict[str, Any]) -> bytes:
    meta = json.dumps(metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(meta)), meta, _U32.pack(len(state_dict))]
    for name, tensor in state_dict.items():
        tensor = tensor.detach().cpu()
        if tensor.dtype not in DTYPE_CODES:
            raise CheckpointError(f"tensor {name!r}: unsupported dtype {tensor.dtype}")
        code = DTYPE_CODES[tensor.dtype]
        array = tensor.numpy()
        raw = name.encode("utf-8")
        parts.append(_U16.pack(len(raw)))
        parts.append(raw)
        parts.append(_U8.pack(code))
        parts.append(_U8.pack(array.ndim))
        parts.extend(_U32.pack(d) for d in array.shape)
        parts.append(np.ascontiguousarray(array, dtype=_WIRE_DTYPES[code]).tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Checkpoint:
    def need(offset, n):
        if len(data) < offset + n:
            raise CheckpointError(f"{source}: truncated checkpoint")

    need(0, _HEADER.size)
    magic, version, meta_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}")
    if version not in (1, FORMAT_VERSION):
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    offset = _HEADER.size
    need(offset, meta_len)
    try:
        metadata = json.loads(data[offset:offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: unreadable metadata ({e})")
    offset += meta_len

    need(offset, _U32.size)
    (count,) = _U32.unpack_from(data, offset)
    offset += _U32.size
    tensors = {}
    for _ in range(count):
        need(offset, _U16.size)
        (n,) = _U16.unpack_from(data, offset)
        offset += _U16.size
        need(offset, n)
        name = data[offset:offset + n].decode("utf-8")
        offset += n
        code = 0
        if version >= 2:
            need(offset, _U8.size)
            (code,) = _U8.unpack_from(data, offset)
            offset += _U8.size
            if code not in _WIRE_DTYPES:
                raise CheckpointError(f"{source}: tensor {name!r} has unknown dtype code {code}")
        wire = _WIRE_DTYPES[code]
        need(offset, _U8.size)
        (ndim,) = _U8.unpack_from(data, offset)
        offset += _U8.size
        need(offset, ndim * _U32.size)
        shape = tuple(_U32.unpack_from(data, offset + i * _U32.size)[0] for i in range(ndim))
        offset += ndim * _U32.size
        size = int(np.prod(shape, dtype=np.int64))
        need(offset, wire.itemsize * size)
        array = np.frombuffer(data, dtype=wire, count=size, offset=offset).reshape(shape)
        tensors[name] = torch.from_numpy(array.astype(wire.newbyteorder("=")))
        offset += wire.itemsize * size
    if offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - offset} trailing bytes")
    return Checkpoint(metadata=metadata, tensors=tensors)


def save_checkpoint(path: Union[str, Path], state_dict: Mapping[str, torch.Tensor],
                    metadata: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(state_dict, metadata))
    tmp.replace(path)
    logger.debug(f"Checkpoint written: {path} ({len(state_dict)} tensors)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint.

    Raises:
        CheckpointError: Missing, truncated or foreign file
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))
