"""
Evaluate a trained model on a dataset split under the retrieval protocols.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from src.analysis.protocols import (
    PROTOCOLS,
    ProtocolResult,
    protocol_all,
    protocol_all_threshold,
    protocol_dissimilar,
    protocol_small_batches,
)
from src.common.errors import ConfigError, DataError
from src.data.manifest import Dataset
from src.models.teacher import TeacherModel
from .model import RetrievalModel, embed_motions, embed_texts


@dataclass
class EvalSettings:
    protocols: Sequence[str] = PROTOCOLS
    threshold: float = 0.95
    subset: int = 100
    batch: int = 32
    seed: int = 0
    reps: int = 10


def split_features(model: RetrievalModel, dataset: Dataset, split: str):
    """Canonical (first) caption and motion features of every pair in the split."""
    pairs = dataset.split(split)
    if not pairs:
        raise DataError(f"dataset {dataset.name!r} has no {split!r} pairs")
    texts = [p.texts[0] for p in pairs]
    t_feats = embed_texts(model, texts)
    m_feats = embed_motions(model, [p.motion for p in pairs])
    labels = [p.label for p in pairs]
    complete = all(label is not None for label in labels)
    if not complete and any(label is not None for label in labels):
        logger.warning(f"{split!r} split is only partially labeled; m2m evaluation skipped")
    return texts, t_feats, m_feats, (labels if complete else None)


def evaluate(model: RetrievalModel, dataset: Dataset, split: str, teacher: Optional[TeacherModel],
             settings: Optional[EvalSettings] = None) -> List[ProtocolResult]:
    """
    Run the requested protocols; m2m is added wherever labels exist.

    small_batches is skipped with a warning when the split is smaller than one
    batch; a dissimilar subset larger than the split is an error.
    """
    settings = settings or EvalSettings()
    unknown = set(settings.protocols) - set(PROTOCOLS)
    if unknown:
        raise ConfigError(f"unknown protocols {sorted(unknown)}; choose from {PROTOCOLS}")

    texts, t_feats, m_feats, labels = split_features(model, dataset, split)
    if "dissimilar" in settings.protocols and settings.subset > len(texts):
        raise DataError(f"dissimilar subset {settings.subset} exceeds the {len(texts)} {split!r} pairs")
    needs_teacher = {"all_threshold", "dissimilar"} & set(settings.protocols)
    teacher_sim = None
    if needs_teacher:
        if teacher is None:
            raise ConfigError(f"protocols {sorted(needs_teacher)} need a teacher")
        teacher_sim = np.asarray(teacher.matrix(texts))

    results = []
    for name in settings.protocols:
        if name == "all":
            results.append(protocol_all(t_feats, m_feats, labels))
        elif name == "all_threshold":
            results.append(protocol_all_threshold(t_feats, m_feats, teacher_sim, settings.threshold))
        elif name == "dissimilar":
            results.append(protocol_dissimilar(t_feats, m_feats, teacher_sim, settings.subset, labels))
        elif name == "small_batches":
            if len(texts) < settings.batch:
                logger.warning(f"small_batches skipped: {len(texts)} pairs < batch {settings.batch}")
                continue
            results.append(protocol_small_batches(t_feats, m_feats, settings.batch, settings.seed,
                                                  settings.reps, labels))
    for r in results:
        logger.bind(protocol=r.protocol, direction="t2m+m2t").info(
            f"{r.protocol}: Rsum {r.rsum:.2f}, t2m R@1 {r.t2m.recalls[1]:.2f}, m2t R@1 {r.m2t.recalls[1]:.2f}")
    return results
