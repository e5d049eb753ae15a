"""
Training configuration, loaded from and saved to YAML.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import torch
import yaml

from src.common.config import config_from_dict, config_to_dict
from src.common.errors import ConfigError
from src.losses.cccl import LossConfig, SwipeConfig
from src.models.config import DecoderConfig, MotionEncoderConfig, TextEncoderConfig

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class TeacherConfig:
    kind: str = "tfidf"  # tfidf | embeddings
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("tfidf", "embeddings"):
            raise ConfigError(f"teacher kind must be tfidf or embeddings, got {self.kind!r}")


@dataclass
class TrainConfig:
    """Full training run configuration"""
    epochs: int = 300
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    dtype: str = "float32"
    datasets: List[str] = field(default_factory=list)  # manifest paths; joint training when > 1
    eval_every: int = 10  # 0 disables validation tracking
    swipe: SwipeConfig = field(default_factory=SwipeConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    teacher: TeacherConfig = field(default_factory=TeacherConfig)
    motion_encoder: MotionEncoderConfig = field(default_factory=MotionEncoderConfig)
    text_encoder: TextEncoderConfig = field(default_factory=TextEncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.motion_encoder.latent_dim != self.text_encoder.latent_dim:
            raise ConfigError(
                f"motion and text latent dims differ ({self.motion_encoder.latent_dim} vs "
                f"{self.text_encoder.latent_dim})")

    @property
    def torch_dtype(self) -> torch.dtype:
        return DTYPES[self.dtype]

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return config_from_dict(cls, data)

    def to_dict(self) -> dict:
        return config_to_dict(self)

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "TrainConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML ({e})")
        return cls.from_dict(data)

    def to_yaml(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
        return path
