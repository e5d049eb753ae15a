"""
Retrieval objectives.

Contrastive InfoNCE (plain and with teacher-filtered negatives), the
column-stochastic score distributions within and across modalities, the
cross-to-uni and teacher-to-uni consistency terms, the lambda swipe
schedule, and the combined cross-consistent contrastive loss.

Similarity matrices have texts on rows and motions on columns.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import torch
import torch.nn.functional as F
from loguru import logger
from torch import Tensor, nn

from src.common.errors import ConfigError, DataError, NumericalError
from src.models.generative_head import KLConfig

LOSS_MODES = ("cccl", "cccl_self", "cccl_supervised", "infonce_f", "infonce")


@dataclass
class SwipeConfig:
    """Epochs over which lambda ramps from 0 to 1"""
    t_start: int = 8
    t_end: int = 20

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ConfigError(f"swipe needs t_start < t_end, got ({self.t_start}, {self.t_end})")


@dataclass
class LossConfig:
    mode: str = "cccl"
    init_tau: float = 0.1
    dist_temperature: float = 1.0
    teacher_temperature: float = 1.0
    exclude_diagonal: bool = False
    filter_threshold: float = 0.95
    filter_in_cccl: bool = False
    lambda_rec: float = 1.0
    lambda_kl: float = 1e-5
    kl: KLConfig = field(default_factory=KLConfig)

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise ConfigError(f"loss mode must be one of {LOSS_MODES}, got {self.mode!r}")
        for name in ("init_tau", "dist_temperature", "teacher_temperature"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lambda_rec < 0 or self.lambda_kl < 0:
            raise ConfigError("loss weights must be non-negative")

    @property
    def needs_teacher(self) -> bool:
        return self.mode in ("cccl", "cccl_supervised", "infonce_f") or self.filter_in_cccl


@dataclass
class ScoreDistributions:
    """Column-stochastic score matrices: column j is a distribution over i."""
    t2m: Tensor
    m2t: Tensor
    m2m: Tensor
    t2t: Tensor
    support: Optional[Tensor] = None  # bool (B, B); None = every entry


@dataclass
class LossBreakdown:
    total: Tensor
    nce: Tensor
    cross_to_uni: Tensor
    teacher_to_uni: Tensor
    rec: Optional[Tensor] = None
    kl: Optional[Tensor] = None

    def as_floats(self) -> Dict[str, float]:
        terms = {"total": self.total, "nce": self.nce, "cross_to_uni": self.cross_to_uni,
                 "teacher_to_uni": self.teacher_to_uni, "rec": self.rec, "kl": self.kl}
        return {k: float(v.detach()) for k, v in terms.items() if v is not None}


def cosine_matrix(X: Tensor, Y: Tensor) -> Tensor:
    """
    Pairwise cosine similarities, entry (i, j) = cos(X_i, Y_j).

    Raises:
        DataError: A row has zero norm
    """
    x_norm = X.norm(dim=-1, keepdim=True)
    y_norm = Y.norm(dim=-1, keepdim=True)
    if (x_norm == 0).any() or (y_norm == 0).any():
        raise DataError("cosine similarity of a zero-norm feature")
    return (X / x_norm) @ (Y / y_norm).T


def _contrastive(sim: Tensor, tau: Tensor, negatives_mask: Optional[Tensor]) -> Tensor:
    if sim.dim() != 2 or sim.shape[0] != sim.shape[1] or sim.shape[0] < 2:
        raise DataError(f"contrastive loss needs a square B x B matrix with B >= 2, got {tuple(sim.shape)}")
    if not torch.isfinite(sim).all():
        raise NumericalError("non-finite similarity matrix")
    logits = sim / tau
    if negatives_mask is not None:
        logits = logits.masked_fill(negatives_mask, float("-inf"))
    rows = torch.diagonal(F.log_softmax(logits, dim=1))
    cols = torch.diagonal(F.log_softmax(logits, dim=0))
    return -(rows + cols).mean()


def info_nce(sim: Tensor, tau) -> Tensor:
    """Symmetric InfoNCE with the diagonal as positives (text->motion rows, motion->text columns)."""
    return _contrastive(sim, torch.as_tensor(tau, dtype=sim.dtype), None)


def filter_mask(teacher_text_sim: Tensor, threshold: float) -> Tensor:
    """Off-diagonal pairs whose teacher similarity reaches threshold."""
    off_diagonal = ~torch.eye(teacher_text_sim.shape[0], dtype=torch.bool, device=teacher_text_sim.device)
    return (teacher_text_sim >= threshold) & off_diagonal


def info_nce_filtered(sim: Tensor, teacher_text_sim: Tensor, threshold: float, tau) -> Tensor:
    """
    InfoNCE with likely false negatives removed from the denominators.

    A row whose off-diagonals are all filtered keeps only its positive and
    contributes 0.
    """
    if teacher_text_sim.shape != sim.shape:
        raise DataError(f"teacher matrix {tuple(teacher_text_sim.shape)} does not match {tuple(sim.shape)}")
    return _contrastive(sim, torch.as_tensor(tau, dtype=sim.dtype), filter_mask(teacher_text_sim, threshold))


def _column_softmax(scores: Tensor, temperature: float, support: Optional[Tensor]) -> Tensor:
    logits = scores / temperature
    if support is not None:
        logits = logits.masked_fill(~support, float("-inf"))
    return F.softmax(logits, dim=0)


def _support(B: int, exclude_diagonal: bool, device=None) -> Optional[Tensor]:
    if not exclude_diagonal:
        return None
    return ~torch.eye(B, dtype=torch.bool, device=device)


def score_distributions(t_feats: Tensor, m_feats: Tensor, dist_temperature: float = 1.0,
                        exclude_diagonal: bool = False) -> ScoreDistributions:
    """
    Column j of t2m is softmax_i cos(t_j, m_i); m2t, m2m and t2t likewise.

    Args:
        t_feats: (B, d) text features
        m_feats: (B, d) motion features
        dist_temperature: Softmax temperature (fixed)
        exclude_diagonal: Drop the self-match from every distribution
    """
    B = t_feats.shape[0]
    if B < 2:
        raise DataError(f"score distributions need B >= 2, got {B}")
    support = _support(B, exclude_diagonal, t_feats.device)
    tm = cosine_matrix(t_feats, m_feats)
    mm = cosine_matrix(m_feats, m_feats)
    tt = cosine_matrix(t_feats, t_feats)
    return ScoreDistributions(
        t2m=_column_softmax(tm.T, dist_temperature, support),
        m2t=_column_softmax(tm, dist_temperature, support),
        m2m=_column_softmax(mm, dist_temperature, support),
        t2t=_column_softmax(tt, dist_temperature, support),
        support=support,
    )


def teacher_distribution(teacher_sim: Tensor, temperature: float = 1.0,
                         exclude_diagonal: bool = False) -> Tensor:
    """Column j = softmax_i teacher(T_i, T_j)."""
    support = _support(teacher_sim.shape[0], exclude_diagonal, teacher_sim.device)
    return _column_softmax(teacher_sim, temperature, support)


def _kl_columns(P: Tensor, Q: Tensor, support: Optional[Tensor]) -> Tensor:
    if support is not None:
        # excluded entries become 1 * (log 1 - log 1) = 0, with no NaN in the backward pass
        P = torch.where(support, P, torch.ones_like(P))
        Q = torch.where(support, Q, torch.ones_like(Q))
    return (P * (torch.log(P) - torch.log(Q))).sum(dim=0)


def _check_positive(support: Optional[Tensor], *dists: Tensor):
    for D in dists:
        values = D if support is None else D[support]
        if (values <= 0).any():
            raise NumericalError("KL divergence of a distribution with a zero-probability entry")


def kl_divergence(P: Tensor, Q: Tensor, support: Optional[Tensor] = None) -> Tensor:
    """KL(P || Q) along dim 0 (per column for matrices)."""
    _check_positive(support, P, Q)
    return _kl_columns(P, Q, support)


def symm_kl(P: Tensor, Q: Tensor, support: Optional[Tensor] = None) -> Tensor:
    """(KL(P||Q) + KL(Q||P)) / 2 along dim 0."""
    _check_positive(support, P, Q)
    return 0.5 * (_kl_columns(P, Q, support) + _kl_columns(Q, P, support))


def loss_cross_to_uni(d: ScoreDistributions) -> Tensor:
    """Cross-modal distributions pulled towards both uni-modal ones (symmetric KL)."""
    s = d.support
    to_m2m = (0.5 * (symm_kl(d.t2m, d.m2m, s) + symm_kl(d.m2t, d.m2m, s))).mean()
    to_t2t = (0.5 * (symm_kl(d.t2m, d.t2t, s) + symm_kl(d.m2t, d.t2t, s))).mean()
    return to_t2t + to_m2m


def loss_teacher_to_uni(S_textGT: Tensor, d: ScoreDistributions) -> Tensor:
    """KL from the teacher distribution (the reference) to t2t and to m2m, column mean."""
    s = d.support
    return kl_divergence(S_textGT, d.t2t, s).mean() + kl_divergence(S_textGT, d.m2m, s).mean()


def lambda_schedule(t: float, swipe: SwipeConfig) -> float:
    """clamp((t - t_start) / (t_end - t_start), 0, 1)"""
    return min(1.0, max(0.0, (t - swipe.t_start) / (swipe.t_end - swipe.t_start)))


def cccl_total(t_feats: Tensor, m_feats: Tensor, tau, S_textGT: Optional[Tensor], lam: float,
               dist_temperature: float = 1.0, exclude_diagonal: bool = False,
               negatives_mask: Optional[Tensor] = None) -> LossBreakdown:
    """
    L_nce + lam * L_cross-to-uni + (1 - lam) * L_teacher-to-uni.

    S_textGT may be None only when lam == 1.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must be in [0, 1], got {lam}")
    sim = cosine_matrix(t_feats, m_feats)
    tau = torch.as_tensor(tau, dtype=sim.dtype)
    nce = _contrastive(sim, tau, negatives_mask)
    dists = score_distributions(t_feats, m_feats, dist_temperature, exclude_diagonal)
    cross = loss_cross_to_uni(dists)
    if S_textGT is None:
        if lam != 1.0:
            raise ConfigError("teacher distribution required when lambda < 1")
        teacher = torch.zeros((), dtype=sim.dtype, device=sim.device)
    else:
        teacher = loss_teacher_to_uni(S_textGT, dists)
    total = nce + lam * cross + (1.0 - lam) * teacher
    return LossBreakdown(total=total, nce=nce, cross_to_uni=cross, teacher_to_uni=teacher)


class CCCLoss(nn.Module):
    """Learnable temperature plus the configured retrieval objective."""

    def __init__(self, config: Optional[LossConfig] = None):
        super().__init__()
        self.config = config or LossConfig()
        self.log_tau = nn.Parameter(torch.tensor(math.log(self.config.init_tau)))

    @property
    def tau(self) -> Tensor:
        return torch.exp(self.log_tau)

    def lambda_for_epoch(self, epoch: int, swipe: SwipeConfig) -> float:
        mode = self.config.mode
        if mode == "cccl":
            return lambda_schedule(epoch, swipe)
        if mode == "cccl_self":
            return 1.0
        if mode == "cccl_supervised":
            return 0.0
        return 0.0  # unused by the InfoNCE-only modes

    def forward(self, t_feats: Tensor, m_feats: Tensor, teacher_sim: Optional[Tensor],
                lam: float) -> LossBreakdown:
        cfg = self.config
        tau = self.tau.to(t_feats.dtype)
        zero = torch.zeros((), dtype=t_feats.dtype, device=t_feats.device)

        if cfg.mode in ("infonce", "infonce_f"):
            sim = cosine_matrix(t_feats, m_feats)
            if cfg.mode == "infonce":
                nce = info_nce(sim, tau)
            else:
                nce = info_nce_filtered(sim, teacher_sim, cfg.filter_threshold, tau)
            return LossBreakdown(total=nce, nce=nce, cross_to_uni=zero, teacher_to_uni=zero)

        S_textGT = None
        if teacher_sim is not None and lam < 1.0:
            S_textGT = teacher_distribution(teacher_sim, cfg.teacher_temperature, cfg.exclude_diagonal)
        negatives = None
        if cfg.filter_in_cccl:
            if teacher_sim is None:
                raise ConfigError("filter_in_cccl needs teacher similarities")
            negatives = filter_mask(teacher_sim, cfg.filter_threshold)
        breakdown = cccl_total(t_feats, m_feats, tau, S_textGT, lam, cfg.dist_temperature,
                               cfg.exclude_diagonal, negatives)
        logger.trace(f"lambda={lam:.3f} tau={float(tau):.4f}")
        return breakdown
