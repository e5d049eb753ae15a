"""
Architecture configuration for the motion encoder, text encoder and decoder.
"""

from dataclasses import dataclass, field
from typing import Dict, List

from src.common.errors import ConfigError
from src.data.motion import N_BODY_JOINTS

ATTENTION_MODES = ("factorized_encoder", "factorized_self_attention")
CLS_ATTENTION = ("both", "spatial", "temporal")

# Body joint index = SMPL joint index - 1 (pelvis is carried by the root token)
DEFAULT_JOINT_GROUPS: Dict[str, List[int]] = {
    "left_leg": [0, 3, 6, 9],
    "right_leg": [1, 4, 7, 10],
    "torso_head": [2, 5, 8, 11, 14],
    "left_arm": [12, 15, 17, 19],
    "right_arm": [13, 16, 18, 20],
}

N_BODY_GROUPS = 5
N_GROUPS = N_BODY_GROUPS + 2  # + root token, feet token


def validate_joint_groups(groups: Dict[str, List[int]]) -> None:
    """The body groups must partition joints 0..20, each exactly once."""
    if len(groups) != N_BODY_GROUPS:
        raise ConfigError(f"expected {N_BODY_GROUPS} body groups, got {len(groups)}")
    flat = [int(j) for joints in groups.values() for j in joints]
    if any(len(joints) == 0 for joints in groups.values()):
        raise ConfigError("joint groups must not be empty")
    if sorted(flat) != list(range(N_BODY_JOINTS)):
        missing = sorted(set(range(N_BODY_JOINTS)) - set(flat))
        repeated = sorted({j for j in flat if flat.count(j) > 1})
        raise ConfigError(
            f"joint groups must cover body joints 0..{N_BODY_JOINTS - 1} exactly once "
            f"(missing {missing}, repeated {repeated}, out of range "
            f"{sorted({j for j in flat if not 0 <= j < N_BODY_JOINTS})})")


def _check_transformer(name: str, depth: int, heads: int, width: int, ffn_width: int, dropout: float):
    if depth < 1:
        raise ConfigError(f"{name}: depth must be positive, got {depth}")
    if heads < 1 or width % heads:
        raise ConfigError(f"{name}: heads ({heads}) must divide model width ({width})")
    if ffn_width < 1:
        raise ConfigError(f"{name}: ffn_width must be positive, got {ffn_width}")
    if not 0.0 <= dropout < 1.0:
        raise ConfigError(f"{name}: dropout must be in [0, 1), got {dropout}")


@dataclass
class MotionEncoderConfig:
    """Factorized spatio-temporal motion encoder"""
    depth: int = 4  # always even: half spatial, half temporal
    heads: int = 4
    ffn_width: int = 256
    model_width: int = 64
    latent_dim: int = 256
    attention_mode: str = "factorized_encoder"
    cls_attention: str = "both"
    max_frames: int = 200
    dropout: float = 0.1
    joint_groups: Dict[str, List[int]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_JOINT_GROUPS.items()})

    def __post_init__(self):
        self.validate()

    def validate(self):
        _check_transformer("motion_encoder", self.depth, self.heads, self.model_width,
                           self.ffn_width, self.dropout)
        if self.depth % 2:
            raise ConfigError(f"motion_encoder: depth must be even, got {self.depth}")
        if self.attention_mode not in ATTENTION_MODES:
            raise ConfigError(f"motion_encoder: attention_mode must be one of {ATTENTION_MODES}")
        if self.cls_attention not in CLS_ATTENTION:
            raise ConfigError(f"motion_encoder: cls_attention must be one of {CLS_ATTENTION}")
        if self.latent_dim < 1:
            raise ConfigError(f"motion_encoder: latent_dim must be positive, got {self.latent_dim}")
        if self.max_frames < 2:
            raise ConfigError(f"motion_encoder: max_frames must be >= 2, got {self.max_frames}")
        validate_joint_groups(self.joint_groups)

    def layer_axes(self) -> List[str]:
        """Attention axis of each layer in execution order."""
        half = self.depth // 2
        if self.attention_mode == "factorized_encoder":
            return ["spatial"] * half + ["temporal"] * half
        return ["spatial", "temporal"] * half


@dataclass
class TextEncoderConfig:
    depth: int = 4
    heads: int = 4
    ffn_width: int = 256
    model_width: int = 64
    latent_dim: int = 256
    dropout: float = 0.1

    def __post_init__(self):
        _check_transformer("text_encoder", self.depth, self.heads, self.model_width,
                           self.ffn_width, self.dropout)
        if self.latent_dim < 1:
            raise ConfigError(f"text_encoder: latent_dim must be positive, got {self.latent_dim}")


@dataclass
class DecoderConfig:
    """Temporal-transformer motion decoder (regularization branch)"""
    depth: int = 2
    heads: int = 4
    ffn_width: int = 256
    model_width: int = 64
    dropout: float = 0.1

    def __post_init__(self):
        _check_transformer("decoder", self.depth, self.heads, self.model_width,
                           self.ffn_width, self.dropout)
