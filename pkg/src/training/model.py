"""
The trainable retrieval model (encoders, decoder, temperature) and its
checkpoint binding.
"""

import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from loguru import logger
from torch import nn

from src.common.errors import CheckpointError, ConfigError
from src.data.motion import MotionSequence
from src.losses.cccl import CCCLoss
from src.models.checkpoint import load_checkpoint, save_checkpoint
from src.models.generative_head import MotionDecoder
from src.models.motion_encoder import LatentGaussian, MotionEncoder, collate_motions
from src.models.text_encoder import TextEncoder, Vocabulary, collate_tokens, tokenize
from .config import TrainConfig


def init_uniform_fan_in(module: nn.Module) -> None:
    """Linear weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    for m in module.modules():
        if isinstance(m, nn.Linear):
            bound = 1.0 / math.sqrt(m.in_features)
            nn.init.uniform_(m.weight, -bound, bound)
            if m.bias is not None:
                nn.init.uniform_(m.bias, -bound, bound)


class RetrievalModel(nn.Module):
    def __init__(self, config: TrainConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.motion_encoder = MotionEncoder(config.motion_encoder)
        self.text_encoder = TextEncoder(len(vocab), config.text_encoder)
        self.decoder = MotionDecoder(config.motion_encoder.latent_dim, config.motion_encoder.joint_groups,
                                     config.decoder)
        self.loss = CCCLoss(config.loss)

    @property
    def dtype(self) -> torch.dtype:
        return self.motion_encoder.mu_head.weight.dtype

    def encode_motions(self, motions: Sequence[MotionSequence]) -> LatentGaussian:
        batch = collate_motions(motions, max_frames=self.config.motion_encoder.max_frames, dtype=self.dtype)
        return self.motion_encoder(batch)

    def encode_texts(self, texts: Sequence[str]) -> LatentGaussian:
        return self.text_encoder(collate_tokens([tokenize(t, self.vocab) for t in texts]))


def build_model(config: TrainConfig, vocab: Vocabulary, seed: Optional[int] = None) -> RetrievalModel:
    """Seeded construction; identical seeds give identical weights."""
    torch.manual_seed(config.seed if seed is None else seed)
    model = RetrievalModel(config, vocab)
    init_uniform_fan_in(model)
    return model.to(config.torch_dtype)


def save_model(model: RetrievalModel, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    metadata = {
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_dict(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    metadata.update(extra or {})
    return save_checkpoint(path, model.state_dict(), metadata)


def load_model(path: Union[str, Path], dtype: Optional[torch.dtype] = None) -> Tuple[RetrievalModel, Dict]:
    """
    Rebuild a model from a checkpoint.

    Returns:
        (model in eval mode, checkpoint metadata)

    Raises:
        CheckpointError: Unreadable file or weights that do not fit the stored config
    """
    checkpoint = load_checkpoint(path)
    meta = checkpoint.metadata
    try:
        config = TrainConfig.from_dict(meta["config"])
        vocab = Vocabulary.from_dict(meta["vocab"])
    except (KeyError, ConfigError) as e:
        raise CheckpointError(f"{path}: invalid checkpoint metadata ({e})")

    model = RetrievalModel(config, vocab).to(dtype or config.torch_dtype)
    try:
        model.load_state_dict(checkpoint.tensors, strict=True)
    except RuntimeError as e:
        raise CheckpointError(f"{path}: weights do not match the stored config ({e})")
    model.eval()
    logger.debug(f"Loaded model from {path}")
    return model, meta


def _chunks(items: Sequence, size: int) -> List[Sequence]:
    return [items[i:i + size] for i in range(0, len(items), size)]


@torch.no_grad()
def embed_motions(model: RetrievalModel, motions: Sequence[MotionSequence], batch_size: int = 64) -> np.ndarray:
    """Motion mean vectors (N, latent) in float64."""
    model.eval()
    parts = [model.encode_motions(chunk).mu.double().cpu().numpy() for chunk in _chunks(list(motions), batch_size)]
    return np.concatenate(parts, axis=0)


@torch.no_grad()
def embed_texts(model: RetrievalModel, texts: Sequence[str], batch_size: int = 64) -> np.ndarray:
    """Text mean vectors (N, latent) in float64."""
    model.eval()
    parts = [model.encode_texts(chunk).mu.double().cpu().numpy() for chunk in _chunks(list(texts), batch_size)]
    return np.concatenate(parts, axis=0)
