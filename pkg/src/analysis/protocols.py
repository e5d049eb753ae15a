"""
Evaluation protocols over aligned text/motion features.

Pair i of the evaluated split contributes text feature i (its canonical,
first caption) and motion feature i; each is the other's ground truth.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.common.errors import ConfigError, DataError
from .retrieval_metrics import (
    RECALL_KS,
    EvalReport,
    best_ranks,
    cosine_scores,
    eval_m2m,
    make_report,
)

PROTOCOLS = ("all", "all_threshold", "dissimilar", "small_batches")
DEFAULT_EXHAUSTIVE_LIMIT = 20000


@dataclass
class ProtocolResult:
    """Both cross-modal directions (and optionally m2m) under one protocol"""
    protocol: str
    t2m: EvalReport
    m2t: EvalReport
    m2m: Optional[EvalReport] = None
    details: Dict = field(default_factory=dict)

    @property
    def rsum(self) -> float:
        return self.t2m.recall_sum + self.m2t.recall_sum


def _check_aligned(t_feats: np.ndarray, m_feats: np.ndarray):
    if t_feats.shape[0] != m_feats.shape[0]:
        raise DataError(f"{t_feats.shape[0]} text features but {m_feats.shape[0]} motion features")
    if t_feats.shape[0] < 1:
        raise DataError("nothing to evaluate")


def _m2m_report(protocol: str, m_feats: np.ndarray, labels: Optional[Sequence],
                skip_unmatched: bool) -> Optional[EvalReport]:
    if labels is None:
        return None
    mAP, nDCG = eval_m2m(m_feats, labels, skip_unmatched=skip_unmatched)
    return EvalReport(direction="m2m", protocol=protocol, map=mAP, ndcg=nDCG, n_queries=len(labels))


def _cross_modal(protocol: str, t_feats: np.ndarray, m_feats: np.ndarray,
                 relevance: np.ndarray) -> Tuple[EvalReport, EvalReport]:
    scores = cosine_scores(t_feats, m_feats)
    t2m = make_report("t2m", protocol, best_ranks(scores, relevance))
    m2t = make_report("m2t", protocol, best_ranks(scores.T, relevance.T))
    return t2m, m2t


def protocol_all(t_feats: np.ndarray, m_feats: np.ndarray,
                 labels: Optional[Sequence[str]] = None) -> ProtocolResult:
    """Every text queries every motion and vice versa; only the paired item is correct."""
    _check_aligned(t_feats, m_feats)
    relevance = np.eye(t_feats.shape[0], dtype=bool)
    t2m, m2t = _cross_modal("all", t_feats, m_feats, relevance)
    return ProtocolResult("all", t2m, m2t, _m2m_report("all", m_feats, labels, skip_unmatched=False))


def protocol_all_threshold(t_feats: np.ndarray, m_feats: np.ndarray, teacher_text_sim: np.ndarray,
                           threshold: float = 0.95) -> ProtocolResult:
    """
    As protocol_all, but any candidate whose description reaches teacher
    similarity threshold with the query's description also counts (both directions).
    """
    _check_aligned(t_feats, m_feats)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [0, 1], got {threshold}")
    N = t_feats.shape[0]
    if teacher_text_sim.shape != (N, N):
        raise DataError(f"teacher matrix {teacher_text_sim.shape} does not match {N} pairs")
    relevance = (np.asarray(teacher_text_sim) >= threshold) | np.eye(N, dtype=bool)
    t2m, m2t = _cross_modal("all_threshold", t_feats, m_feats, relevance)
    return ProtocolResult("all_threshold", t2m, m2t, details={"threshold": threshold})


def min_pairwise_distance(distance: np.ndarray, subset: Sequence[int]) -> float:
    subset = list(subset)
    if len(subset) < 2:
        return math.inf
    block = distance[np.ix_(subset, subset)]
    return float(block[~np.eye(len(subset), dtype=bool)].min())


def _greedy_farthest(distance: np.ndarray, similarity: np.ndarray, n: int) -> List[int]:
    N = distance.shape[0]
    off = ~np.eye(N, dtype=bool)
    mean_sim = np.where(off, similarity, 0.0).sum(axis=1) / max(N - 1, 1)
    selected = [int(np.argmin(mean_sim))]
    nearest = distance[selected[0]].copy()
    while len(selected) < n:
        candidates = nearest.copy()
        candidates[selected] = -np.inf
        nxt = int(np.argmax(candidates))
        selected.append(nxt)
        nearest = np.minimum(nearest, distance[nxt])
    return selected


def _exhaustive_max_min(distance: np.ndarray, n: int) -> List[int]:
    best, best_value = None, -math.inf
    for subset in itertools.combinations(range(distance.shape[0]), n):
        value = min_pairwise_distance(distance, subset)
        if value > best_value:
            best, best_value = list(subset), value
    return best


def select_dissimilar(teacher_text_sim: np.ndarray, n: int, method: str = "auto",
                      exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> List[int]:
    """
    Pick n pairs whose captions are mutually far apart (distance = 1 - teacher similarity).

    greedy: start at the pair with the lowest mean similarity to the others, then
    repeatedly add the pair farthest from the selection (ties to the lowest index).
    exhaustive: exact max-min subset. auto: exhaustive while C(N, n) <= exhaustive_limit.

    Returns:
        Sorted pair indices
    """
    sim = np.asarray(teacher_text_sim, dtype=np.float64)
    N = sim.shape[0]
    if not 1 <= n <= N:
        raise DataError(f"subset size {n} must be in [1, {N}]")
    if method not in ("auto", "greedy", "exhaustive"):
        raise ConfigError(f"unknown selection method {method!r}")
    if n == N:
        return list(range(N))

    distance = 1.0 - sim
    if method == "auto":
        method = "exhaustive" if n > 1 and math.comb(N, n) <= exhaustive_limit else "greedy"
    if method == "exhaustive" and n > 1:
        selected = _exhaustive_max_min(distance, n)
    else:
        selected = _greedy_farthest(distance, sim, n)
    logger.debug(f"dissimilar subset ({method}): n={n} of {N}, "
                 f"min distance {min_pairwise_distance(distance, selected):.4f}")
    return sorted(selected)


def protocol_dissimilar(t_feats: np.ndarray, m_feats: np.ndarray, teacher_text_sim: np.ndarray,
                        n: int = 100, labels: Optional[Sequence[str]] = None, method: str = "auto",
                        exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> ProtocolResult:
    """protocol_all restricted to a maximally dissimilar subset of n pairs."""
    _check_aligned(t_feats, m_feats)
    if n > t_feats.shape[0]:
        raise DataError(f"subset size {n} exceeds the {t_feats.shape[0]} evaluated pairs")
    idx = select_dissimilar(teacher_text_sim, n, method, exhaustive_limit)
    sub_t, sub_m = t_feats[idx], m_feats[idx]
    relevance = np.eye(len(idx), dtype=bool)
    t2m, m2t = _cross_modal("dissimilar", sub_t, sub_m, relevance)
    sub_labels = None if labels is None else [labels[i] for i in idx]
    try:
        m2m = _m2m_report("dissimilar", sub_m, sub_labels, skip_unmatched=True)
    except DataError:
        logger.warning("dissimilar subset has no same-label pair; m2m skipped")
        m2m = None
    return ProtocolResult("dissimilar", t2m, m2t, m2m, details={"indices": idx})


def _mean_reports(reports: List[EvalReport], protocol: str) -> EvalReport:
    first = reports[0]
    out = EvalReport(direction=first.direction, protocol=protocol,
                     n_queries=int(sum(r.n_queries for r in reports)))
    if first.recalls:
        out.recalls = {k: float(np.mean([r.recalls[k] for r in reports])) for k in RECALL_KS}
        out.medr = float(np.mean([r.medr for r in reports]))
        out.meanr = float(np.mean([r.meanr for r in reports]))
    if first.map is not None:
        out.map = float(np.mean([r.map for r in reports]))
        out.ndcg = float(np.mean([r.ndcg for r in reports]))
    return out


def protocol_small_batches(t_feats: np.ndarray, m_feats: np.ndarray, batch: int = 32, seed: int = 0,
                           reps: int = 10, labels: Optional[Sequence[str]] = None) -> ProtocolResult:
    """
    Average of protocol_all over random batches of `batch` pairs.

    Each of `reps` seeded partitions splits the pairs into full batches
    (remainder dropped); metrics are averaged over every batch of every partition.
    """
    _check_aligned(t_feats, m_feats)
    N = t_feats.shape[0]
    if N < batch:
        raise DataError(f"small-batch protocol needs at least {batch} pairs, got {N}")
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")

    rng = np.random.default_rng(seed)
    t2m, m2t, m2m = [], [], []
    for _ in range(reps):
        order = rng.permutation(N)
        for start in range(0, N - batch + 1, batch):
            idx = np.sort(order[start:start + batch])
            relevance = np.eye(batch, dtype=bool)
            a, b = _cross_modal("small_batches", t_feats[idx], m_feats[idx], relevance)
            t2m.append(a)
            m2t.append(b)
            if labels is not None:
                try:
                    m2m.append(_m2m_report("small_batches", m_feats[idx], [labels[i] for i in idx],
                                           skip_unmatched=True))
                except DataError:
                    logger.debug("small batch without any same-label pair skipped for m2m")

    return ProtocolResult(
        "small_batches",
        _mean_reports(t2m, "small_batches"),
        _mean_reports(m2t, "small_batches"),
        _mean_reports(m2m, "small_batches") if m2m else None,
        details={"batches": len(t2m), "batch": batch, "reps": reps, "seed": seed},
    )


def average_over_protocols(results: Sequence[ProtocolResult]) -> ProtocolResult:
    """Mean of every metric across protocols; Rsum follows from the averaged recalls."""
    if not results:
        raise DataError("nothing to average")
    m2m = [r.m2m for r in results if r.m2m is not None]
    return ProtocolResult(
        "average",
        _mean_reports([r.t2m for r in results], "average"),
        _mean_reports([r.m2t for r in results], "average"),
        _mean_reports(m2m, "average") if m2m else None,
    )


def average_runs(runs: Sequence[Sequence[ProtocolResult]]) -> List[ProtocolResult]:
    """Average matching protocols over independent runs (e.g. seeds)."""
    if not runs:
        raise DataError("nothing to average")
    by_protocol: Dict[str, List[ProtocolResult]] = {}
    for run in runs:
        for result in run:
            by_protocol.setdefault(result.protocol, []).append(result)
    averaged = []
    for protocol, results in by_protocol.items():
        if len(results) != len(runs):
            raise DataError(f"protocol {protocol!r} missing from some runs")
        m2m = [r.m2m for r in results if r.m2m is not None]
        averaged.append(ProtocolResult(
            protocol,
            _mean_reports([r.t2m for r in results], protocol),
            _mean_reports([r.m2t for r in results], protocol),
            _mean_reports(m2m, protocol) if m2m else None,
        ))
    return averaged
