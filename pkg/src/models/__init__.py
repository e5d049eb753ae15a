"""
Encoders, teacher backends, VAE decoder and checkpoint I/O.
"""

from .config import (
    DEFAULT_JOINT_GROUPS,
    N_GROUPS,
    MotionEncoderConfig,
    TextEncoderConfig,
    DecoderConfig,
    validate_joint_groups,
)
from .layers import TransformerLayer, sinusoidal_encoding, masked_mean
from .motion_encoder import (
    LatentGaussian,
    MotionBatch,
    GroupedMotion,
    JointGrouping,
    MotionEncoder,
    collate_motions,
    group_joints,
    spatial_attention,
    temporal_attention,
    encode_motion,
    parameter_count,
)
from .text_encoder import (
    Vocabulary,
    TokenizedText,
    TextBatch,
    TextEncoder,
    normalize_text,
    tokenize,
    collate_tokens,
    encode_text,
    PAD_ID,
    OOV_ID,
)
from .teacher import (
    TeacherModel,
    TfidfTeacher,
    EmbeddingFileTeacher,
    write_teacher_embeddings,
    teacher_matrix,
    build_teacher,
)
from .generative_head import (
    LatentSample,
    MotionReconstruction,
    KLConfig,
    MotionDecoder,
    sample_noise,
    reparameterize,
    decode_motion,
    loss_reconstruction,
    gaussian_kl,
    loss_kl,
)
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint

__all__ = [
    'DEFAULT_JOINT_GROUPS', 'N_GROUPS', 'MotionEncoderConfig', 'TextEncoderConfig',
    'DecoderConfig', 'validate_joint_groups',
    'TransformerLayer', 'sinusoidal_encoding', 'masked_mean',
    'LatentGaussian', 'MotionBatch', 'GroupedMotion', 'JointGrouping', 'MotionEncoder',
    'collate_motions', 'group_joints', 'spatial_attention', 'temporal_attention',
    'encode_motion', 'parameter_count',
    'Vocabulary', 'TokenizedText', 'TextBatch', 'TextEncoder', 'normalize_text',
    'tokenize', 'collate_tokens', 'encode_text', 'PAD_ID', 'OOV_ID',
    'TeacherModel', 'TfidfTeacher', 'EmbeddingFileTeacher', 'write_teacher_embeddings',
    'teacher_matrix', 'build_teacher',
    'LatentSample', 'MotionReconstruction', 'KLConfig', 'MotionDecoder', 'sample_noise',
    'reparameterize', 'decode_motion', 'loss_reconstruction', 'gaussian_kl', 'loss_kl',
    'Checkpoint', 'save_checkpoint', 'load_checkpoint',
]
