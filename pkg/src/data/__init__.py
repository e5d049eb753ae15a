"""
Motion-text data: feature layout, tensor files, manifests and synthetic corpora.
"""

from .motion import (
    MotionSequence,
    downsample,
    compute_velocities,
    compute_feet_contact,
    positions_to_features,
    N_BODY_JOINTS,
    BODY_DIM,
    ROOT_DIM,
    FEET_DIM,
    GROUP_LAYOUT,
)
from .motion_io import read_motion, write_motion, read_motion_header
from .manifest import (
    Dataset,
    JointDataset,
    TextMotionPair,
    Source,
    Split,
    load_manifest,
    write_manifest,
    unify,
)
from .synthetic import synth_dataset

__all__ = [
    'MotionSequence', 'downsample', 'compute_velocities', 'compute_feet_contact',
    'positions_to_features', 'N_BODY_JOINTS', 'BODY_DIM', 'ROOT_DIM', 'FEET_DIM',
    'GROUP_LAYOUT', 'read_motion', 'write_motion', 'read_motion_header',
    'Dataset', 'JointDataset', 'TextMotionPair', 'Source', 'Split',
    'load_manifest', 'write_manifest', 'unify', 'synth_dataset',
]
