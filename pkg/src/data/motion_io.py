"""
Motion tensor file format ("MOTF").

Layout (little endian):
    magic "MOTF" | version u16 | fps f32 | T u32 | group count u8
    per group: tag u8 (0 body, 1 root, 2 feet) | token count u16 | token dim u16
    group payloads as f32, time-major row-major, in group order
"""

import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from src.common.errors import LayoutMismatchError, MotionFormatError
from .motion import GROUP_LAYOUT, GROUP_NAMES, MotionSequence

MAGIC = b"MOTF"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHfIB")
_GROUP = struct.Struct("<BHH")


def encode_motion_bytes(motion: MotionSequence) -> bytes:
    T = motion.frame_count
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, motion.fps, T, len(GROUP_NAMES))]
    payloads = []
    for tag, (name, array) in enumerate(motion.groups()):
        count, dim = GROUP_LAYOUT[name]
        parts.append(_GROUP.pack(tag, count, dim))
        payloads.append(np.ascontiguousarray(array, dtype="<f4").reshape(T, count * dim).tobytes())
    return b"".join(parts + payloads)


def decode_motion_bytes(data: bytes, source: str = "<bytes>") -> MotionSequence:
    if len(data) < _HEADER.size:
        raise MotionFormatError(f"{source}: truncated header")
    magic, version, fps, T, n_groups = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MotionFormatError(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MotionFormatError(f"{source}: unsupported format version {version}")
    if n_groups != len(GROUP_NAMES):
        raise LayoutMismatchError(f"{source}: expected {len(GROUP_NAMES)} groups, header has {n_groups}")

    offset = _HEADER.size
    shapes = []
    for expected_tag, name in enumerate(GROUP_NAMES):
        if len(data) < offset + _GROUP.size:
            raise MotionFormatError(f"{source}: truncated group table")
        tag, count, dim = _GROUP.unpack_from(data, offset)
        offset += _GROUP.size
        if tag != expected_tag:
            raise MotionFormatError(f"{source}: group {expected_tag} has tag {tag}")
        if (count, dim) != GROUP_LAYOUT[name]:
            raise LayoutMismatchError(
                f"{source}: {name} group is {count}x{dim}, expected "
                f"{GROUP_LAYOUT[name][0]}x{GROUP_LAYOUT[name][1]}")
        shapes.append((count, dim))

    arrays = []
    for count, dim in shapes:
        n_bytes = 4 * T * count * dim
        if len(data) < offset + n_bytes:
            raise MotionFormatError(f"{source}: payload shorter than header declares")
        flat = np.frombuffer(data, dtype="<f4", count=T * count * dim, offset=offset)
        arrays.append(flat.astype(np.float32))
        offset += n_bytes
    if offset != len(data):
        raise MotionFormatError(f"{source}: {len(data) - offset} trailing bytes")

    body, root, feet = arrays
    return MotionSequence(
        body=body.reshape(T, *GROUP_LAYOUT["body"]),
        root=root.reshape(T, GROUP_LAYOUT["root"][1]),
        feet=feet.reshape(T, GROUP_LAYOUT["feet"][1]),
        fps=float(fps),
    )


def read_motion_header(path: Union[str, Path]) -> Tuple[float, int, Dict[str, Tuple[int, int]]]:
    """
    Read only the header of a motion file.

    Returns:
        Tuple of (fps, frame count, {group name: (token count, token dim)})
    """
    path = Path(path)
    if not path.is_file():
        raise MotionFormatError(f"motion file not found: {path}")
    with open(path, "rb") as f:
        head = f.read(_HEADER.size + 8 * _GROUP.size)
    if len(head) < _HEADER.size:
        raise MotionFormatError(f"{path}: truncated header")
    magic, version, fps, T, n_groups = _HEADER.unpack_from(head, 0)
    if magic != MAGIC:
        raise MotionFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MotionFormatError(f"{path}: unsupported format version {version}")

    groups = {}
    offset = _HEADER.size
    for _ in range(n_groups):
        if len(head) < offset + _GROUP.size:
            raise MotionFormatError(f"{path}: truncated group table")
        tag, count, dim = _GROUP.unpack_from(head, offset)
        offset += _GROUP.size
        if tag >= len(GROUP_NAMES):
            raise MotionFormatError(f"{path}: unknown group tag {tag}")
        groups[GROUP_NAMES[tag]] = (count, dim)
    return float(fps), int(T), groups


def write_motion(path: Union[str, Path], motion: MotionSequence) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_motion_bytes(motion))


def read_motion(path: Union[str, Path]) -> MotionSequence:
    """
    Load a motion tensor file.

    Args:
        path: MOTF file

    Returns:
        MotionSequence

    Raises:
        MotionFormatError: Unreadable or truncated file
        LayoutMismatchError: Header dims differ from the common layout
    """
    path = Path(path)
    if not path.is_file():
        raise MotionFormatError(f"motion file not found: {path}")
    return decode_motion_bytes(path.read_bytes(), source=str(path))
