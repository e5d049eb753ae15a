"""
Retrieval Metrics Module
Exact cosine ranking, recall@k / median rank, and binary-relevance
mAP / nDCG for motion-to-motion retrieval.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.common.errors import DataError

RECALL_KS = (1, 2, 3, 5, 10)


@dataclass
class RankedList:
    """Candidates of one query, best first; ties keep ascending candidate index."""
    query_index: int
    indices: np.ndarray
    scores: np.ndarray


@dataclass
class EvalReport:
    """Metrics of one retrieval direction under one protocol"""
    direction: str  # t2m | m2t | m2m
    protocol: str
    recalls: dict = field(default_factory=dict)  # k -> percentage
    medr: float = float("nan")
    meanr: float = float("nan")
    map: Optional[float] = None
    ndcg: Optional[float] = None
    n_queries: int = 0

    def recall(self, k: int) -> float:
        return self.recalls[k]

    @property
    def recall_sum(self) -> float:
        return float(sum(self.recalls.values()))


def normalize_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("cannot rank a zero-norm feature vector")
    return X / norms


def cosine_scores(queries: np.ndarray, db: np.ndarray) -> np.ndarray:
    """(Q, M) cosine similarities."""
    return normalize_rows(queries) @ normalize_rows(db).T


def rank_order(scores: np.ndarray) -> np.ndarray:
    """Per-row candidate order by descending score, stable in candidate index."""
    return np.argsort(-scores, axis=1, kind="stable")


def rank_all(queries: np.ndarray, db: np.ndarray) -> List[RankedList]:
    """
    Full exact ranking of db for every query.

    Args:
        queries: (Q, d) features
        db: (M, d) features

    Returns:
        One RankedList per query
    """
    scores = cosine_scores(queries, db)
    order = rank_order(scores)
    return [RankedList(query_index=q, indices=order[q], scores=scores[q, order[q]])
            for q in range(scores.shape[0])]


def best_ranks(scores: np.ndarray, relevance: np.ndarray) -> np.ndarray:
    """
    1-based rank of the best-placed relevant candidate per query.

    Args:
        scores: (Q, M) similarities
        relevance: (Q, M) bool; every row needs at least one True
    """
    if not relevance.any(axis=1).all():
        raise DataError("every query needs at least one relevant candidate")
    order = rank_order(scores)
    positions = np.empty_like(order)
    rows = np.arange(order.shape[0])[:, None]
    positions[rows, order] = np.arange(order.shape[1])[None, :]
    masked = np.where(relevance, positions, order.shape[1])
    return masked.min(axis=1) + 1


def recall_metrics(ranks: Sequence[int]) -> Tuple[dict, float, float]:
    """
    Recall@k percentages, median rank and mean rank.

    Returns:
        ({k: R@k}, MedR, MeanR); an even count takes the mean of the middle two ranks
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise DataError("recall metrics of an empty rank list")
    if np.any(ranks < 1):
        raise DataError("ranks must be >= 1")
    recalls = {k: 100.0 * float(np.count_nonzero(ranks <= k)) / ranks.size for k in RECALL_KS}
    return recalls, float(np.median(ranks)), float(ranks.mean())


def make_report(direction: str, protocol: str, ranks: Sequence[int]) -> EvalReport:
    recalls, medr, meanr = recall_metrics(ranks)
    return EvalReport(direction=direction, protocol=protocol, recalls=recalls,
                      medr=medr, meanr=meanr, n_queries=len(ranks))


def average_precision(relevant: np.ndarray) -> float:
    """AP of a binary relevance vector in ranked order."""
    hits = np.flatnonzero(relevant)
    if hits.size == 0:
        raise DataError("average precision needs at least one relevant item")
    precision_at_hits = np.arange(1, hits.size + 1) / (hits + 1)
    return float(precision_at_hits.mean())


def ndcg(relevant: np.ndarray) -> float:
    """nDCG with gain 1/log2(rank + 1) for binary relevance."""
    relevant = np.asarray(relevant, dtype=bool)
    n_rel = int(relevant.sum())
    if n_rel == 0:
        raise DataError("nDCG needs at least one relevant item")
    discounts = 1.0 / np.log2(np.arange(2, relevant.size + 2))
    return float(discounts[relevant].sum() / discounts[:n_rel].sum())


def eval_m2m(m_feats: np.ndarray, labels: Sequence[Optional[str]],
             skip_unmatched: bool = False) -> Tuple[float, float]:
    """
    Motion-to-motion retrieval with label-match relevance; the query is excluded.

    Args:
        m_feats: (N, d) motion features
        labels: Class label per motion
        skip_unmatched: Skip queries with no same-label candidate instead of failing

    Returns:
        (mAP, nDCG) averaged over queries

    Raises:
        DataError: Missing label, or a query without any relevant candidate
    """
    if any(label is None for label in labels):
        raise DataError("motion-to-motion evaluation needs a label on every motion")
    labels = np.asarray(labels, dtype=object)
    N = len(labels)
    if m_feats.shape[0] != N:
        raise DataError(f"{m_feats.shape[0]} features but {N} labels")

    scores = cosine_scores(m_feats, m_feats)
    aps, ndcgs = [], []
    for q in range(N):
        candidates = np.delete(np.arange(N), q)
        order = candidates[np.argsort(-scores[q, candidates], kind="stable")]
        relevant = labels[order] == labels[q]
        if not relevant.any():
            if skip_unmatched:
                continue
            raise DataError(f"query {q} (label {labels[q]!r}) has no same-label candidate")
        aps.append(average_precision(relevant))
        ndcgs.append(ndcg(relevant))
    if not aps:
        raise DataError("no query has a same-label candidate")
    if len(aps) < N:
        logger.debug(f"m2m: skipped {N - len(aps)} of {N} queries without a same-label candidate")
    return float(np.mean(aps)), float(np.mean(ndcgs))
