"""
Frozen text teachers that score text-text similarity.

Two backends: a TF-IDF cosine model fitted on the training corpus, and a
loader for precomputed sentence embeddings ("TEMB" files).

TEMB layout (little endian):
    magic "TEMB" | count u32 | dim u32
    per record: id length u16 | id UTF-8 bytes | dim x f32
The record id is the text itself.
"""

import math
import struct
from abc import ABC, abstractmethod
from collections import Counter
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy import sparse

from src.common.errors import ConfigError, DataError, TeacherUnavailableError
from .text_encoder import normalize_text

TEMB_MAGIC = b"TEMB"
_TEMB_HEADER = struct.Struct("<4sII")
_ID_LENGTH = struct.Struct("<H")


class TeacherModel(ABC):
    """Text-text similarity oracle."""

    @abstractmethod
    def matrix(self, texts: Sequence[str]) -> np.ndarray:
        """(B, B) pairwise similarity matrix."""

    def similarity(self, a: str, b: str) -> float:
        return float(self.matrix([a, b])[0, 1])


class TfidfTeacher(TeacherModel):
    """Cosine of L2-normalized TF-IDF vectors (smooth idf)."""

    def __init__(self, terms: Dict[str, int], idf: np.ndarray):
        self.terms = terms
        self.idf = idf

    @classmethod
    def fit(cls, corpus: Sequence[str]) -> "TfidfTeacher":
        docs = [set(normalize_text(t)) for t in corpus]
        if not docs:
            raise DataError("cannot fit a TF-IDF teacher on an empty corpus")
        df = Counter(word for doc in docs for word in doc)
        terms = {w: i for i, w in enumerate(sorted(df))}
        n = len(docs)
        idf = np.array([math.log((1 + n) / (1 + df[w])) + 1.0 for w in sorted(df)])
        logger.debug(f"TF-IDF teacher fitted on {n} texts, {len(terms)} terms")
        return cls(terms, idf)

    def transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        """Row-normalized TF-IDF vectors; unseen words are ignored."""
        rows, cols, vals = [], [], []
        for r, text in enumerate(texts):
            counts = Counter(w for w in normalize_text(text) if w in self.terms)
            for word, count in counts.items():
                rows.append(r)
                cols.append(self.terms[word])
                vals.append(count * self.idf[self.terms[word]])
        X = sparse.csr_matrix((vals, (rows, cols)), shape=(len(texts), len(self.terms)), dtype=np.float64)
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1))).ravel()
        inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        return sparse.diags(inv) @ X

    def matrix(self, texts: Sequence[str]) -> np.ndarray:
        X = self.transform(texts)
        sim = (X @ X.T).toarray()
        sim = np.clip(sim, 0.0, 1.0)
        keys = [" ".join(normalize_text(t)) for t in texts]
        for i, a in enumerate(keys):
            for j, b in enumerate(keys):
                if a == b:
                    sim[i, j] = 1.0
        return sim


class EmbeddingFileTeacher(TeacherModel):
    """Cosine similarity of precomputed embeddings, keyed by text."""

    def __init__(self, embeddings: Dict[str, np.ndarray], source: str = "<memory>"):
        self.embeddings = embeddings
        self.source = source

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingFileTeacher":
        path = Path(path)
        if not path.is_file():
            raise TeacherUnavailableError(f"teacher embedding file not found: {path}")
        data = path.read_bytes()
        if len(data) < _TEMB_HEADER.size:
            raise TeacherUnavailableError(f"{path}: truncated header")
        magic, count, dim = _TEMB_HEADER.unpack_from(data, 0)
        if magic != TEMB_MAGIC:
            raise TeacherUnavailableError(f"{path}: bad magic {magic!r}")

        offset = _TEMB_HEADER.size
        embeddings = {}
        for _ in range(count):
            if len(data) < offset + _ID_LENGTH.size:
                raise TeacherUnavailableError(f"{path}: truncated record")
            (n,) = _ID_LENGTH.unpack_from(data, offset)
            offset += _ID_LENGTH.size
            key = data[offset:offset + n].decode("utf-8")
            offset += n
            if len(data) < offset + 4 * dim:
                raise TeacherUnavailableError(f"{path}: truncated record {key!r}")
            embeddings[key] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
            offset += 4 * dim
        logger.info(f"Loaded {len(embeddings)} teacher embeddings (dim {dim}) from {path}")
        return cls(embeddings, source=str(path))

    def matrix(self, texts: Sequence[str]) -> np.ndarray:
        vectors = []
        for text in texts:
            if text not in self.embeddings:
                raise TeacherUnavailableError(f"{self.source}: no teacher embedding for {text!r}")
            vectors.append(self.embeddings[text])
        V = np.stack(vectors)
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise TeacherUnavailableError(f"{self.source}: zero-norm teacher embedding")
        V = V / norms
        return np.clip(V @ V.T, -1.0, 1.0)


def write_teacher_embeddings(path: Union[str, Path], mapping: Mapping[str, np.ndarray]) -> Path:
    """Write a TEMB file; all vectors must share one dimension."""
    path = Path(path)
    vectors = {k: np.asarray(v, dtype=np.float64).ravel() for k, v in mapping.items()}
    dims = {v.shape[0] for v in vectors.values()}
    if len(dims) > 1:
        raise DataError(f"teacher embeddings have mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0

    parts = [_TEMB_HEADER.pack(TEMB_MAGIC, len(vectors), dim)]
    for key, vector in vectors.items():
        raw = key.encode("utf-8")
        parts.append(_ID_LENGTH.pack(len(raw)))
        parts.append(raw)
        parts.append(vector.astype("<f4").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(parts))
    return path


def teacher_matrix(texts: Sequence[str], teacher: TeacherModel) -> np.ndarray:
    """
    Raw pairwise teacher similarities for a batch of texts.

    Raises:
        DataError: Fewer than two texts
        TeacherUnavailableError: Backend cannot score a text
    """
    if len(texts) < 2:
        raise DataError(f"teacher matrix needs at least two texts, got {len(texts)}")
    return teacher.matrix(list(texts))


def build_teacher(kind: str, corpus: Optional[Sequence[str]] = None,
                  path: Optional[Union[str, Path]] = None) -> TeacherModel:
    """Teacher factory: "tfidf" fits on corpus, "embeddings" loads path."""
    if kind == "tfidf":
        if not corpus:
            raise ConfigError("tfidf teacher needs a training corpus")
        return TfidfTeacher.fit(list(corpus))
    if kind == "embeddings":
        if path is None:
            raise TeacherUnavailableError("embeddings teacher configured without a file")
        return EmbeddingFileTeacher.load(path)
    raise ConfigError(f"unknown teacher kind {kind!r}")
