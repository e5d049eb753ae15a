"""
Text-motion datasets and the line-delimited manifest format.

A manifest is UTF-8 JSON lines. An optional first line is a header
{"format": "motion-manifest", "version": 1, "name": ..., "layout": {...}};
every other line is one record:
{"id", "texts", "motion_file", "source", "split", "label"?}
Motion files are resolved relative to the manifest directory.
"""

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from loguru import logger

from src.common.errors import DataError, LayoutMismatchError, ManifestError, MotionFormatError
from .motion import GROUP_LAYOUT, MotionSequence
from .motion_io import read_motion, read_motion_header, write_motion

MANIFEST_FORMAT = "motion-manifest"
MANIFEST_VERSION = 1
ID_SEPARATOR = "/"


class Source(str, Enum):
    A = "A"
    B = "B"
    SYNTHETIC = "synthetic"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass
class TextMotionPair:
    """One motion with its descriptions."""
    id: str
    texts: List[str]
    source: Source
    split: Split
    label: Optional[str] = None
    motion_file: Optional[Path] = None
    _motion: Optional[MotionSequence] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.texts:
            raise DataError(f"pair {self.id!r}: empty texts")
        if self.motion_file is None and self._motion is None:
            raise DataError(f"pair {self.id!r}: no motion attached")

    @property
    def motion(self) -> MotionSequence:
        """Motion tensors, loaded on first access."""
        if self._motion is None:
            self._motion = read_motion(self.motion_file)
        return self._motion

    @property
    def raw_id(self) -> str:
        return self.id.split(ID_SEPARATOR)[-1]


@dataclass
class Dataset:
    """Ordered collection of text-motion pairs."""
    name: str
    pairs: List[TextMotionPair]
    provenance: List[str] = field(default_factory=list)
    layout: Dict[str, Tuple[int, int]] = field(default_factory=lambda: dict(GROUP_LAYOUT))

    def __post_init__(self):
        if not self.provenance:
            self.provenance = [self.name]
        seen = set()
        for pair in self.pairs:
            if pair.id in seen:
                raise DataError(f"dataset {self.name!r}: duplicate id {pair.id!r}")
            seen.add(pair.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[TextMotionPair]:
        return iter(self.pairs)

    def split(self, name: Union[str, Split]) -> List[TextMotionPair]:
        split = Split(name)
        return [p for p in self.pairs if p.split == split]

    def texts(self, split: Optional[Union[str, Split]] = None) -> List[str]:
        pairs = self.pairs if split is None else self.split(split)
        return [t for p in pairs for t in p.texts]

    def labels(self, split: Optional[Union[str, Split]] = None) -> List[Optional[str]]:
        pairs = self.pairs if split is None else self.split(split)
        return [p.label for p in pairs]


@dataclass
class JointDataset(Dataset):
    """Concatenation of several datasets with ids prefixed by the member dataset name."""


def _normalize_layout(raw: Dict) -> Dict[str, Tuple[int, int]]:
    return {name: (int(v[0]), int(v[1])) for name, v in raw.items()}


def _parse_record(record: Dict, base_dir: Path, path: Path, line_number: int,
                  layout: Dict[str, Tuple[int, int]]) -> TextMotionPair:
    def fail(message):
        raise ManifestError(message, path=str(path), line_number=line_number)

    for key in ("id", "texts", "motion_file", "source", "split"):
        if key not in record:
            fail(f"missing field {key!r}")
    texts = record["texts"]
    if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
        fail("texts must be a list of strings")
    if not texts:
        fail("empty texts")
    try:
        source = Source(record["source"])
        split = Split(record["split"])
    except ValueError as e:
        fail(str(e))

    motion_file = base_dir / record["motion_file"]
    if not motion_file.is_file():
        fail(f"motion file not found: {motion_file}")
    try:
        _, T, groups = read_motion_header(motion_file)
    except MotionFormatError as e:
        fail(str(e))
    if groups != layout:
        raise LayoutMismatchError(
            f"{path}:{line_number}: motion file layout {groups} does not match header {layout}")
    if T < 1:
        fail("motion has no frames")

    return TextMotionPair(
        id=str(record["id"]),
        texts=list(texts),
        source=source,
        split=split,
        label=record.get("label"),
        motion_file=motion_file,
    )


def load_manifest(path: Union[str, Path], name: Optional[str] = None) -> Dataset:
    """
    Load a dataset manifest.

    Args:
        path: Manifest file
        name: Dataset name (defaults to the header name or the file stem)

    Returns:
        Dataset in manifest order; motion tensors load lazily

    Raises:
        ManifestError: Missing file or malformed record (with line number)
        LayoutMismatchError: Motion file dims differ from the header layout
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError("manifest not found", path=str(path))

    layout = dict(GROUP_LAYOUT)
    header_name = None
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"invalid JSON: {e.msg}", path=str(path), line_number=line_number)
            if not isinstance(record, dict):
                raise ManifestError("record must be an object", path=str(path), line_number=line_number)

            if record.get("format") == MANIFEST_FORMAT:
                if pairs:
                    raise ManifestError("header must be the first record",
                                        path=str(path), line_number=line_number)
                if record.get("version") != MANIFEST_VERSION:
                    raise ManifestError(f"unsupported manifest version {record.get('version')}",
                                        path=str(path), line_number=line_number)
                header_name = record.get("name")
                if "layout" in record:
                    layout = _normalize_layout(record["layout"])
                    if layout != GROUP_LAYOUT:
                        raise LayoutMismatchError(
                            f"{path}: header layout {layout} differs from the common layout")
                continue

            pairs.append(_parse_record(record, path.parent, path, line_number, layout))

    dataset = Dataset(name=name or header_name or path.stem, pairs=pairs, layout=layout)
    logger.debug(f"Loaded {len(dataset)} pairs from {path}")
    return dataset


def _motion_filename(pair_id: str) -> str:
    return pair_id.replace(ID_SEPARATOR, "__") + ".motf"


def write_manifest(dataset: Dataset, path: Union[str, Path], motion_dir: str = "motions") -> Path:
    """
    Write a manifest, plus motion files for pairs that only live in memory.

    Args:
        dataset: Dataset to persist
        path: Output manifest path
        motion_dir: Directory for motion files, relative to the manifest

    Returns:
        Path of the written manifest
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = [json.dumps({
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "name": dataset.name,
        "layout": {k: list(v) for k, v in dataset.layout.items()},
    }, ensure_ascii=False)]

    for pair in dataset.pairs:
        if pair.motion_file is None:
            motion_path = path.parent / motion_dir / _motion_filename(pair.id)
            write_motion(motion_path, pair.motion)
        else:
            motion_path = pair.motion_file
        record = {
            "id": pair.id,
            "texts": pair.texts,
            "motion_file": Path(os.path.relpath(motion_path, path.parent)).as_posix(),
            "source": pair.source.value,
            "split": pair.split.value,
        }
        if pair.label is not None:
            record["label"] = pair.label
        lines.append(json.dumps(record, ensure_ascii=False))

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def unify(*datasets: Dataset) -> JointDataset:
    """
    Concatenate datasets for joint training.

    Plain datasets get their ids prefixed with the dataset name
    ("A/m1" for pair "m1" of dataset "A"); pairs of an input JointDataset are
    already prefixed and kept. The source tag of every pair is preserved.

    Raises:
        LayoutMismatchError: Datasets disagree on token dims
        DataError: Repeated dataset name or id collision after prefixing
    """
    if not datasets:
        raise DataError("unify needs at least one dataset")
    names = [ds.name for ds in datasets]
    if len(set(names)) != len(names):
        raise DataError(f"unify got repeated dataset names: {names}")
    layout = datasets[0].layout
    pairs = []
    provenance = []
    for ds in datasets:
        if ds.layout != layout:
            raise LayoutMismatchError(
                f"dataset {ds.name!r} layout {ds.layout} differs from {layout}")
        provenance.extend(ds.provenance)
        if isinstance(ds, JointDataset):
            pairs.extend(ds.pairs)
        else:
            pairs.extend(replace(p, id=f"{ds.name}{ID_SEPARATOR}{p.id}") for p in ds.pairs)

    # Dataset.__post_init__ rejects collisions
    return JointDataset(name="+".join(provenance), pairs=pairs,
                        provenance=provenance, layout=dict(layout))
