"""
Generative Head Module
Reparameterized sampling, the temporal-transformer motion decoder, and the
reconstruction and KL regularizers of the VAE branch.
"""

from dataclasses import dataclass
from typing import Optional, Union

import torch
from einops import rearrange
from torch import Tensor, nn

from src.common.errors import LayoutMismatchError
from src.data.motion import BODY_DIM, FEET_DIM, N_BODY_JOINTS, ROOT_DIM
from .config import DecoderConfig, validate_joint_groups
from .layers import TransformerLayer, sinusoidal_encoding
from .motion_encoder import LatentGaussian, MotionBatch


@dataclass
class LatentSample:
    """z = mu + noise * sigma; the noise draw is kept for replay."""
    z: Tensor
    noise: Tensor


@dataclass
class MotionReconstruction:
    body: Tensor  # (B, T, 21, 12)
    root: Tensor  # (B, T, 4)
    feet: Tensor  # (B, T, 4)
    mask: Tensor  # (B, T)


@dataclass
class KLConfig:
    """Which KL terms enter the regularizer"""
    prior_motion: bool = True
    prior_text: bool = True
    text_to_motion: bool = True
    motion_to_text: bool = True


def sample_noise(g: LatentGaussian, generator: Optional[torch.Generator] = None) -> Tensor:
    return torch.randn(g.mu.shape, generator=generator, dtype=g.mu.dtype, device=g.mu.device)


def reparameterize(g: LatentGaussian, noise: Tensor) -> LatentSample:
    """Differentiable draw z = mu + noise * exp(log_var / 2)."""
    if noise.shape != g.mu.shape:
        raise LayoutMismatchError(f"noise shape {tuple(noise.shape)} does not match mu {tuple(g.mu.shape)}")
    z = g.mu + noise * torch.exp(0.5 * g.log_var)
    return LatentSample(z=z, noise=noise)


class MotionDecoder(nn.Module):
    """
    Broadcast z over T frames, add time encodings, run temporal transformer
    layers, then seven per-group heads scatter back to the motion layout.
    """

    def __init__(self, latent_dim: int, joint_groups: dict, config: Optional[DecoderConfig] = None):
        super().__init__()
        self.config = config or DecoderConfig()
        cfg = self.config
        validate_joint_groups(joint_groups)
        width = cfg.model_width

        order = [j for joints in joint_groups.values() for j in joints]
        # inverse permutation: concatenated group outputs -> joint order
        self.register_buffer("joint_order", torch.argsort(torch.as_tensor(order, dtype=torch.long)),
                             persistent=False)
        self.group_sizes = [len(joints) for joints in joint_groups.values()]

        self.input_proj = nn.Linear(latent_dim, width)
        self.layers = nn.ModuleList(
            [TransformerLayer(width, cfg.heads, cfg.ffn_width, cfg.dropout) for _ in range(cfg.depth)])
        self.final_norm = nn.LayerNorm(width)
        self.body_heads = nn.ModuleList([nn.Linear(width, n * BODY_DIM) for n in self.group_sizes])
        self.root_head = nn.Linear(width, ROOT_DIM)
        self.feet_head = nn.Linear(width, FEET_DIM)

    def forward(self, z: Tensor, mask: Tensor) -> MotionReconstruction:
        B, T = mask.shape
        h = self.input_proj(z)[:, None, :]
        h = h + sinusoidal_encoding(T, h.shape[-1], dtype=h.dtype, device=h.device)[None]
        h = h * mask[..., None].to(h.dtype)
        for layer in self.layers:
            h = layer(h, mask)
        h = self.final_norm(h)

        parts = [rearrange(head(h), "b t (j d) -> b t j d", d=BODY_DIM) for head in self.body_heads]
        body = torch.cat(parts, dim=2).index_select(2, self.joint_order)
        weights = mask[..., None].to(h.dtype)
        return MotionReconstruction(
            body=body * weights[..., None],
            root=self.root_head(h) * weights,
            feet=self.feet_head(h) * weights,
            mask=mask,
        )


def decode_motion(z: Tensor, frames: Union[int, Tensor], decoder: MotionDecoder) -> MotionReconstruction:
    """
    Decode latents to motion tensors.

    Args:
        z: (B, latent) or (latent,) samples
        frames: Frame count T (>= 1) or a (B, T) frame mask
        decoder: Decoder weights
    """
    if z.dim() == 1:
        z = z[None]
    if isinstance(frames, int):
        if frames < 1:
            raise LayoutMismatchError(f"frame count must be >= 1, got {frames}")
        mask = torch.ones(z.shape[0], frames, dtype=torch.bool, device=z.device)
    else:
        mask = frames
    return decoder(z, mask)


def loss_reconstruction(target: Union[MotionBatch, MotionReconstruction],
                        prediction: Union[MotionBatch, MotionReconstruction]) -> Tensor:
    """
    L1 over every group, normalized by each motion's frame count, averaged over the batch.

    Padded frames of the target are ignored.
    """
    for name, count, dim in (("body", N_BODY_JOINTS, BODY_DIM), ("root", 1, ROOT_DIM), ("feet", 1, FEET_DIM)):
        a, b = getattr(target, name), getattr(prediction, name)
        if a.shape != b.shape:
            raise LayoutMismatchError(f"{name}: target {tuple(a.shape)} vs prediction {tuple(b.shape)}")

    mask = target.mask
    weights = mask.to(target.body.dtype)
    per_frame = (
        (target.body - prediction.body).abs().sum(dim=(2, 3))
        + (target.root - prediction.root).abs().sum(dim=2)
        + (target.feet - prediction.feet).abs().sum(dim=2)
    )
    per_motion = (per_frame * weights).sum(dim=1) / weights.sum(dim=1).clamp_min(1.0)
    return per_motion.mean()


def gaussian_kl(p: LatentGaussian, q: LatentGaussian) -> Tensor:
    """Closed-form KL(p || q) for diagonal Gaussians, summed over dims, one value per row."""
    var_ratio = torch.exp(p.log_var - q.log_var)
    mean_term = (p.mu - q.mu) ** 2 * torch.exp(-q.log_var)
    return 0.5 * (var_ratio + mean_term - 1.0 - (p.log_var - q.log_var)).sum(dim=-1)


def standard_normal_like(g: LatentGaussian) -> LatentGaussian:
    return LatentGaussian(mu=torch.zeros_like(g.mu), log_var=torch.zeros_like(g.log_var))


def loss_kl(motion_g: LatentGaussian, text_g: LatentGaussian, config: Optional[KLConfig] = None) -> Tensor:
    """
    KL(motion||N) + KL(text||N) + KL(text||motion) + KL(motion||text), batch mean.

    Terms disabled in config are left out.
    """
    if motion_g.mu.shape != text_g.mu.shape:
        raise LayoutMismatchError(
            f"latent shapes differ: motion {tuple(motion_g.mu.shape)} vs text {tuple(text_g.mu.shape)}")
    config = config or KLConfig()
    prior = standard_normal_like(motion_g)
    total = torch.zeros(motion_g.mu.shape[:-1], dtype=motion_g.mu.dtype, device=motion_g.mu.device)
    if config.prior_motion:
        total = total + gaussian_kl(motion_g, prior)
    if config.prior_text:
        total = total + gaussian_kl(text_g, prior)
    if config.text_to_motion:
        total = total + gaussian_kl(text_g, motion_g)
    if config.motion_to_text:
        total = total + gaussian_kl(motion_g, text_g)
    return total.mean()
