"""
Shared transformer building blocks.
"""

import math
from typing import Optional

import torch
import torch.nn.functional as F
from einops import rearrange
from torch import Tensor, nn

from src.common.errors import DivergenceError


def sinusoidal_encoding(length: int, dim: int, dtype: torch.dtype = torch.float32,
                        device: Optional[torch.device] = None) -> Tensor:
    """
    Fixed sinusoidal position table.

    Args:
        length: Number of positions
        dim: Encoding width
        dtype: Output dtype
        device: Output device

    Returns:
        (length, dim) tensor; even columns sin, odd columns cos
    """
    position = torch.arange(length, dtype=torch.float64, device=device)[:, None]
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64, device=device)
                    * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64, device=device)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)[:, : dim // 2]
    return table.to(dtype)


class TransformerLayer(nn.Module):
    """
    Pre-norm residual block: x + MHA(LN(x)), then + FFN(LN(x)).

    Masked positions are excluded as keys and zeroed in the output.
    """

    def __init__(self, width: int, heads: int, ffn_width: int, dropout: float = 0.1):
        super().__init__()
        self.heads = heads
        self.scale = (width // heads) ** -0.5

        self.attn_norm = nn.LayerNorm(width)
        self.to_qkv = nn.Linear(width, 3 * width)
        self.to_out = nn.Linear(width, width)
        self.ffn_norm = nn.LayerNorm(width)
        self.ffn = nn.Sequential(
            nn.Linear(width, ffn_width),
            nn.GELU(),
            nn.Dropout(dropout),
            nn.Linear(ffn_width, width),
        )
        self.dropout = nn.Dropout(dropout)

    def attention(self, x: Tensor, mask: Optional[Tensor] = None) -> Tensor:
        q, k, v = self.to_qkv(x).chunk(3, dim=-1)
        q, k, v = (rearrange(t, "b n (h d) -> b h n d", h=self.heads) for t in (q, k, v))

        logits = torch.einsum("bhid,bhjd->bhij", q, k) * self.scale
        if mask is not None:
            # finite fill keeps fully masked rows NaN-free
            logits = logits.masked_fill(~mask[:, None, None, :], torch.finfo(logits.dtype).min)
        weights = self.dropout(F.softmax(logits, dim=-1))

        out = torch.einsum("bhij,bhjd->bhid", weights, v)
        return self.to_out(rearrange(out, "b h n d -> b n (h d)"))

    def forward(self, x: Tensor, mask: Optional[Tensor] = None) -> Tensor:
        """
        Args:
            x: (B, L, D) sequence
            mask: (B, L) bool, True at valid positions

        Returns:
            (B, L, D) sequence

        Raises:
            DivergenceError: Non-finite activations
        """
        x = x + self.dropout(self.attention(self.attn_norm(x), mask))
        x = x + self.dropout(self.ffn(self.ffn_norm(x)))
        if mask is not None:
            x = x * mask[..., None].to(x.dtype)
        if not torch.isfinite(x).all():
            raise DivergenceError(f"non-finite activations in transformer layer (shape {tuple(x.shape)})")
        return x


def masked_mean(x: Tensor, mask: Tensor, dim: int) -> Tensor:
    """Mean of x over dim, counting only positions where mask is True."""
    weights = mask.to(x.dtype)
    while weights.dim() < x.dim():
        weights = weights[..., None]
    return (x * weights).sum(dim) / weights.sum(dim).clamp_min(1.0)
