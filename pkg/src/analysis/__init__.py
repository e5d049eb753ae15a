"""
Retrieval evaluation: ranking, metrics, protocols and reports.
"""

from .retrieval_metrics import (
    RECALL_KS,
    RankedList,
    EvalReport,
    normalize_rows,
    cosine_scores,
    rank_all,
    best_ranks,
    recall_metrics,
    make_report,
    average_precision,
    ndcg,
    eval_m2m,
)
from .protocols import (
    PROTOCOLS,
    ProtocolResult,
    protocol_all,
    protocol_all_threshold,
    select_dissimilar,
    min_pairwise_distance,
    protocol_dissimilar,
    protocol_small_batches,
    average_over_protocols,
    average_runs,
)
from .report import results_frame, render_table, result_records, write_records

__all__ = [
    'RECALL_KS', 'RankedList', 'EvalReport', 'normalize_rows', 'cosine_scores', 'rank_all',
    'best_ranks', 'recall_metrics', 'make_report', 'average_precision', 'ndcg', 'eval_m2m',
    'PROTOCOLS', 'ProtocolResult', 'protocol_all', 'protocol_all_threshold', 'select_dissimilar',
    'min_pairwise_distance', 'protocol_dissimilar', 'protocol_small_batches',
    'average_over_protocols', 'average_runs',
    'results_frame', 'render_table', 'result_records', 'write_records',
]
