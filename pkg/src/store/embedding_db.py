"""
Embedding database of motion mean vectors with exact cosine search.

File layout (little endian):
    magic "EMBD" | version u16 | count u32 | dim u32
    metadata length u32 | metadata (UTF-8 JSON, sorted keys)
    per record: id length u16 | id UTF-8 | dim x f32 (unit norm)
    CRC-32 u32 of every preceding byte
"""

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from src.common.errors import (
    CheckpointError,
    ChecksumError,
    ConfigError,
    EmbeddingDBError,
    LayoutMismatchError,
    TextError,
)
from src.data.manifest import Dataset, Split
from src.data.motion import GROUP_LAYOUT

MAGIC = b"EMBD"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHII")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")


@dataclass
class QueryHit:
    id: str
    score: float


@dataclass
class EmbeddingDB:
    """Immutable id -> unit vector table plus provenance metadata."""
    ids: List[str]
    vectors: np.ndarray  # (N, dim) float32, unit rows
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise EmbeddingDBError(f"{len(self.ids)} ids but {self.vectors.shape[0]} vectors")
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingDBError("duplicate ids in embedding database")
        self._index = {id_: i for i, id_ in enumerate(self.ids)}

    @classmethod
    def from_vectors(cls, ids: Sequence[str], vectors: np.ndarray,
                     metadata: Optional[Dict[str, Any]] = None) -> "EmbeddingDB":
        """Normalize rows (in float64) and store them as float32."""
        vectors = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise EmbeddingDBError("cannot store a zero-norm embedding")
        return cls(ids=list(ids), vectors=(vectors / norms).astype(np.float32), metadata=dict(metadata or {}))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def vector_of(self, id_: str) -> np.ndarray:
        if id_ not in self._index:
            raise EmbeddingDBError(f"id {id_!r} not in embedding database")
        return self.vectors[self._index[id_]]

    def search(self, vector: np.ndarray, k: int, exclude: Sequence[str] = ()) -> List[QueryHit]:
        """
        Exact top-k by cosine; ties keep database order.

        k larger than the number of candidates is truncated with a warning.
        """
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        query = np.asarray(vector, dtype=np.float64).ravel()
        if query.shape[0] != self.dim:
            raise LayoutMismatchError(f"query has dim {query.shape[0]}, database has {self.dim}")
        norm = np.linalg.norm(query)
        if norm == 0:
            raise EmbeddingDBError("zero-norm query vector")

        scores = self.vectors.astype(np.float64) @ (query / norm)
        order = np.argsort(-scores, kind="stable")
        excluded = set(exclude)
        order = [i for i in order if self.ids[i] not in excluded]
        if k > len(order):
            logger.warning(f"k={k} exceeds the {len(order)} candidates; returning all")
            k = len(order)
        return [QueryHit(id=self.ids[i], score=float(scores[i])) for i in order[:k]]

    def to_bytes(self) -> bytes:
        meta = json.dumps(self.metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
        parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(self.ids), self.dim), _U32.pack(len(meta)), meta]
        for id_, vector in zip(self.ids, self.vectors):
            raw = id_.encode("utf-8")
            parts.append(_U16.pack(len(raw)))
            parts.append(raw)
            parts.append(np.ascontiguousarray(vector, dtype="<f4").tobytes())
        payload = b"".join(parts)
        return payload + _U32.pack(zlib.crc32(payload) & 0xFFFFFFFF)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "EmbeddingDB":
        if len(data) < _HEADER.size + 2 * _U32.size:
            raise EmbeddingDBError(f"{source}: truncated database")
        payload, (stored,) = data[:-_U32.size], _U32.unpack(data[-_U32.size:])
        if zlib.crc32(payload) & 0xFFFFFFFF != stored:
            raise ChecksumError(f"{source}: checksum mismatch")

        magic, version, count, dim = _HEADER.unpack_from(payload, 0)
        if magic != MAGIC:
            raise EmbeddingDBError(f"{source}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise EmbeddingDBError(f"{source}: unsupported version {version}")
        offset = _HEADER.size
        (meta_len,) = _U32.unpack_from(payload, offset)
        offset += _U32.size
        metadata = json.loads(payload[offset:offset + meta_len].decode("utf-8"))
        offset += meta_len

        ids, vectors = [], np.zeros((count, dim), dtype=np.float32)
        for i in range(count):
            if len(payload) < offset + _U16.size:
                raise EmbeddingDBError(f"{source}: truncated record {i}")
            (n,) = _U16.unpack_from(payload, offset)
            offset += _U16.size
            ids.append(payload[offset:offset + n].decode("utf-8"))
            offset += n
            if len(payload) < offset + 4 * dim:
                raise EmbeddingDBError(f"{source}: truncated record {i}")
            vectors[i] = np.frombuffer(payload, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
        if offset != len(payload):
            raise EmbeddingDBError(f"{source}: {len(payload) - offset} trailing bytes")
        return cls(ids=ids, vectors=vectors, metadata=metadata)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.info(f"Embedding database written: {path} ({len(self)} x {self.dim})")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingDB":
        path = Path(path)
        if not path.is_file():
            raise EmbeddingDBError(f"embedding database not found: {path}")
        return cls.from_bytes(path.read_bytes(), source=str(path))


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_db(checkpoint: Union[str, Path], dataset: Dataset, split: str = "test",
             out: Optional[Union[str, Path]] = None) -> EmbeddingDB:
    """
    Embed every motion of a split with a trained motion encoder.

    The creation time is taken from the checkpoint, so rebuilding from the
    same checkpoint and dataset yields identical bytes.

    Raises:
        CheckpointError: Unloadable checkpoint
        LayoutMismatchError: Dataset layout differs from the model's input layout
    """
    from src.training.model import embed_motions, load_model

    if dataset.layout != GROUP_LAYOUT:
        raise LayoutMismatchError(f"dataset layout {dataset.layout} differs from the model layout {GROUP_LAYOUT}")
    pairs = dataset.split(split)
    if not pairs:
        raise EmbeddingDBError(f"dataset {dataset.name!r} has no {split!r} pairs")

    model, meta = load_model(checkpoint)
    vectors = embed_motions(model, [p.motion for p in pairs])
    db = EmbeddingDB.from_vectors([p.id for p in pairs], vectors, metadata={
        "checkpoint": str(checkpoint),
        "checkpoint_hash": file_sha256(checkpoint),
        "dataset": dataset.name,
        "split": Split(split).value,
        "created_at": meta.get("created_at"),
    })
    if out is not None:
        db.save(out)
    return db


def _resolve_checkpoint(db: EmbeddingDB, checkpoint: Optional[Union[str, Path]]) -> Path:
    path = Path(checkpoint if checkpoint is not None else db.metadata.get("checkpoint", ""))
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    expected = db.metadata.get("checkpoint_hash")
    if expected is not None and file_sha256(path) != expected:
        raise CheckpointError(f"{path} is not the checkpoint this database was built with")
    return path


def query(db: EmbeddingDB, text: str, checkpoint: Optional[Union[str, Path]] = None, k: int = 5) -> List[QueryHit]:
    """
    Text-to-motion lookup: encode the text's mean vector and search the database.

    Args:
        db: Embedding database
        text: Query description
        checkpoint: Model checkpoint (defaults to the one recorded in the database)
        k: Number of hits
    """
    from src.training.model import embed_texts, load_model

    if not text or not text.strip():
        raise TextError("empty query text")
    model, _ = load_model(_resolve_checkpoint(db, checkpoint))
    vector = embed_texts(model, [text])[0]
    return db.search(vector, k)


def query_by_example(db: EmbeddingDB, motion_id: str, k: int = 5) -> List[QueryHit]:
    """Motion-to-motion lookup with a stored motion as the query (itself excluded)."""
    return db.search(db.vector_of(motion_id), k, exclude=(motion_id,))
