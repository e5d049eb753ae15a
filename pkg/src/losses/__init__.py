"""
Contrastive and cross-consistency retrieval losses.
"""

from .cccl import (
    LOSS_MODES,
    SwipeConfig,
    LossConfig,
    ScoreDistributions,
    LossBreakdown,
    cosine_matrix,
    info_nce,
    filter_mask,
    info_nce_filtered,
    score_distributions,
    teacher_distribution,
    kl_divergence,
    symm_kl,
    loss_cross_to_uni,
    loss_teacher_to_uni,
    lambda_schedule,
    cccl_total,
    CCCLoss,
)

__all__ = [
    'LOSS_MODES', 'SwipeConfig', 'LossConfig', 'ScoreDistributions', 'LossBreakdown',
    'cosine_matrix', 'info_nce', 'filter_mask', 'info_nce_filtered', 'score_distributions',
    'teacher_distribution', 'kl_divergence', 'symm_kl', 'loss_cross_to_uni',
    'loss_teacher_to_uni', 'lambda_schedule', 'cccl_total', 'CCCLoss',
]
