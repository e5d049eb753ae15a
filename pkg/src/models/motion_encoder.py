"""
Motion Encoder Module
Joint grouping into seven part tokens followed by a factorized
spatio-temporal transformer; two class tokens carry the latent Gaussian.

Class-token routing: both tokens are replicated per frame in spatial stages
and per group in temporal stages, and their replicas are mean-pooled (over
valid frames, or over groups) whenever the attention axis changes and at
the output.
"""

from dataclasses import dataclass
from itertools import groupby
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from einops import rearrange, repeat
from torch import Tensor, nn

from src.common.errors import ConfigError
from src.data.motion import BODY_DIM, FEET_DIM, ROOT_DIM, MotionSequence, downsample
from .config import N_GROUPS, MotionEncoderConfig, validate_joint_groups
from .layers import TransformerLayer, masked_mean, sinusoidal_encoding

N_CLS = 2


@dataclass
class LatentGaussian:
    """Diagonal Gaussian in the common space; log_var stores log sigma^2."""
    mu: Tensor
    log_var: Tensor

    @property
    def variance(self) -> Tensor:
        return torch.exp(self.log_var)

    def detach(self) -> "LatentGaussian":
        return LatentGaussian(self.mu.detach(), self.log_var.detach())


@dataclass
class MotionBatch:
    """Zero-padded motions with a frame mask (True = valid)."""
    body: Tensor  # (B, T, 21, 12)
    root: Tensor  # (B, T, 4)
    feet: Tensor  # (B, T, 4)
    mask: Tensor  # (B, T) bool

    @property
    def lengths(self) -> Tensor:
        return self.mask.sum(dim=1)

    def to(self, dtype: torch.dtype) -> "MotionBatch":
        return MotionBatch(self.body.to(dtype), self.root.to(dtype), self.feet.to(dtype), self.mask)


@dataclass
class GroupedMotion:
    tokens: Tensor  # (B, T, 7, D')
    mask: Tensor  # (B, T)


def collate_motions(motions: Sequence[MotionSequence], max_frames: Optional[int] = None,
                    pad_to: Optional[int] = None, dtype: torch.dtype = torch.float32) -> MotionBatch:
    """
    Pad motions to a common length.

    Args:
        motions: Motions to batch
        max_frames: Downsample longer motions to this cap first
        pad_to: Minimum padded length (extra frames are masked)
        dtype: Tensor dtype

    Returns:
        MotionBatch
    """
    if not motions:
        raise ConfigError("cannot collate an empty list of motions")
    if max_frames is not None:
        motions = [downsample(m, max_frames) for m in motions]
    T = max(m.frame_count for m in motions)
    if pad_to is not None:
        T = max(T, pad_to)
    B = len(motions)

    body = np.zeros((B, T) + motions[0].body.shape[1:], dtype=np.float64)
    root = np.zeros((B, T, ROOT_DIM), dtype=np.float64)
    feet = np.zeros((B, T, FEET_DIM), dtype=np.float64)
    mask = np.zeros((B, T), dtype=bool)
    for i, m in enumerate(motions):
        n = m.frame_count
        body[i, :n] = m.body
        root[i, :n] = m.root
        feet[i, :n] = m.feet
        mask[i, :n] = True

    return MotionBatch(
        body=torch.as_tensor(body, dtype=dtype),
        root=torch.as_tensor(root, dtype=dtype),
        feet=torch.as_tensor(feet, dtype=dtype),
        mask=torch.as_tensor(mask),
    )


class JointGrouping(nn.Module):
    """Seven independent affine maps: five body parts, the root and the feet token."""

    def __init__(self, joint_groups: dict, width: int):
        super().__init__()
        validate_joint_groups(joint_groups)
        self.group_names = list(joint_groups) + ["root", "feet"]
        for g, joints in enumerate(joint_groups.values()):
            self.register_buffer(f"joints_{g}", torch.as_tensor(list(joints), dtype=torch.long),
                                 persistent=False)
        self.n_body_groups = len(joint_groups)
        self.projections = nn.ModuleList(
            [nn.Linear(len(joints) * BODY_DIM, width) for joints in joint_groups.values()]
            + [nn.Linear(ROOT_DIM, width), nn.Linear(FEET_DIM, width)]
        )

    def joint_index(self, g: int) -> Tensor:
        return getattr(self, f"joints_{g}")

    def forward(self, body: Tensor, root: Tensor, feet: Tensor) -> Tensor:
        tokens = []
        for g in range(self.n_body_groups):
            part = body.index_select(2, self.joint_index(g))
            tokens.append(self.projections[g](rearrange(part, "b t j d -> b t (j d)")))
        tokens.append(self.projections[-2](root))
        tokens.append(self.projections[-1](feet))
        return torch.stack(tokens, dim=2)


def group_joints(motion: Union[MotionSequence, MotionBatch], grouping: JointGrouping) -> GroupedMotion:
    """
    Aggregate joints into the seven part tokens.

    Args:
        motion: A single motion or a padded batch
        grouping: Per-group affine weights

    Returns:
        GroupedMotion with tokens (B, T, 7, D') zeroed at padded frames
    """
    if isinstance(motion, MotionSequence):
        dtype = grouping.projections[0].weight.dtype
        motion = collate_motions([motion], dtype=dtype)
    tokens = grouping(motion.body, motion.root, motion.feet)
    tokens = tokens * motion.mask[:, :, None, None].to(tokens.dtype)
    return GroupedMotion(tokens=tokens, mask=motion.mask)


def spatial_attention(layer: TransformerLayer, tokens: Tensor, frame_mask: Tensor,
                      cls: Optional[Tensor] = None) -> Tuple[Tensor, Optional[Tensor]]:
    """
    Attention across the group axis, independently per frame.

    Args:
        layer: Transformer layer
        tokens: (B, T, G, D)
        frame_mask: (B, T)
        cls: Optional per-frame class-token replicas (B, T, C, D)

    Returns:
        (tokens, cls replicas)
    """
    B = tokens.shape[0]
    n_cls = 0 if cls is None else cls.shape[2]
    seq = tokens if cls is None else torch.cat([cls, tokens], dim=2)
    mask = repeat(frame_mask, "b t -> (b t) l", l=seq.shape[2])
    out = layer(rearrange(seq, "b t l d -> (b t) l d"), mask)
    out = rearrange(out, "(b t) l d -> b t l d", b=B)
    return out[:, :, n_cls:], (out[:, :, :n_cls] if cls is not None else None)


def temporal_attention(layer: TransformerLayer, tokens: Tensor, frame_mask: Tensor,
                       cls: Optional[Tensor] = None) -> Tuple[Tensor, Optional[Tensor]]:
    """
    Attention across the time axis, independently per group.

    Args:
        layer: Transformer layer
        tokens: (B, T, G, D)
        frame_mask: (B, T)
        cls: Optional per-group class-token replicas (B, G, C, D)

    Returns:
        (tokens, cls replicas)
    """
    B, _, G, _ = tokens.shape
    seq = rearrange(tokens, "b t g d -> b g t d")
    mask = frame_mask
    n_cls = 0
    if cls is not None:
        n_cls = cls.shape[2]
        seq = torch.cat([cls, seq], dim=2)
        mask = torch.cat([torch.ones(B, n_cls, dtype=torch.bool, device=mask.device), mask], dim=1)
    mask = repeat(mask, "b l -> (b g) l", g=G)
    out = layer(rearrange(seq, "b g l d -> (b g) l d"), mask)
    out = rearrange(out, "(b g) l d -> b g l d", b=B)
    tokens_out = rearrange(out[:, :, n_cls:], "b g t d -> b t g d")
    return tokens_out, (out[:, :, :n_cls] if cls is not None else None)


class MotionEncoder(nn.Module):
    """
    Factorized spatio-temporal transformer producing a LatentGaussian.

    factorized_encoder runs N/2 spatial then N/2 temporal layers;
    factorized_self_attention interleaves them, spatial first.
    """

    def __init__(self, config: Optional[MotionEncoderConfig] = None):
        super().__init__()
        self.config = config or MotionEncoderConfig()
        cfg = self.config
        width = cfg.model_width

        self.grouping = JointGrouping(cfg.joint_groups, width)
        self.group_embedding = nn.Parameter(torch.randn(N_GROUPS, width) * 0.02)
        self.cls_tokens = nn.Parameter(torch.randn(N_CLS, width) * 0.02)
        self.layers = nn.ModuleList(
            [TransformerLayer(width, cfg.heads, cfg.ffn_width, cfg.dropout) for _ in range(cfg.depth)])
        self.axes = cfg.layer_axes()
        self.final_norm = nn.LayerNorm(width)
        self.mu_head = nn.Linear(width, cfg.latent_dim)
        self.log_var_head = nn.Linear(width, cfg.latent_dim)

    def stages(self) -> List[Tuple[str, List[TransformerLayer]]]:
        """Consecutive layers sharing an attention axis."""
        indexed = zip(self.axes, self.layers)
        return [(axis, [layer for _, layer in run]) for axis, run in groupby(indexed, key=lambda p: p[0])]

    def embed(self, batch: MotionBatch) -> GroupedMotion:
        grouped = group_joints(batch, self.grouping)
        tokens = grouped.tokens
        T = tokens.shape[1]
        time_pe = sinusoidal_encoding(T, tokens.shape[-1], dtype=tokens.dtype, device=tokens.device)
        tokens = tokens + time_pe[None, :, None, :] + self.group_embedding[None, None, :, :]
        tokens = tokens * grouped.mask[:, :, None, None].to(tokens.dtype)
        return GroupedMotion(tokens=tokens, mask=grouped.mask)

    def forward(self, batch: MotionBatch) -> LatentGaussian:
        grouped = self.embed(batch)
        x, mask = grouped.tokens, grouped.mask
        B, T, G, _ = x.shape
        cls = repeat(self.cls_tokens, "c d -> b c d", b=B)

        for axis, layers in self.stages():
            use_cls = self.config.cls_attention in ("both", axis)
            if axis == "spatial":
                replicas = repeat(cls, "b c d -> b t c d", t=T) if use_cls else None
                for layer in layers:
                    x, replicas = spatial_attention(layer, x, mask, replicas)
                if use_cls:
                    cls = masked_mean(replicas, mask, dim=1)
            else:
                replicas = repeat(cls, "b c d -> b g c d", g=G) if use_cls else None
                for layer in layers:
                    x, replicas = temporal_attention(layer, x, mask, replicas)
                if use_cls:
                    cls = replicas.mean(dim=1)

        cls = self.final_norm(cls)
        return LatentGaussian(mu=self.mu_head(cls[:, 0]), log_var=self.log_var_head(cls[:, 1]))


def encode_motion(motion: Union[MotionSequence, Sequence[MotionSequence], MotionBatch],
                  encoder: MotionEncoder) -> LatentGaussian:
    """
    Encode one motion, a list of motions or a prepared batch.

    Motions are downsampled to the encoder's max_frames before batching.
    """
    if isinstance(motion, MotionBatch):
        batch = motion
    else:
        motions = [motion] if isinstance(motion, MotionSequence) else list(motion)
        dtype = encoder.mu_head.weight.dtype
        batch = collate_motions(motions, max_frames=encoder.config.max_frames, dtype=dtype)
    return encoder(batch)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
