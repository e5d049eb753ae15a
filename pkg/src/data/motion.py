"""
Motion Feature Module
Per-frame skeleton token layout and the feature operations applied to it:
downsampling, joint velocities, foot contacts and body-token assembly.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from src.common.errors import ConfigError, DataError, LayoutMismatchError

# Non-root SMPL joints; each carries 3 rifke + 6 rot6d + 3 velocity features
N_BODY_JOINTS = 21
BODY_DIM = 12
ROOT_DIM = 4  # y-rotation velocity, xy linear velocity, height
FEET_DIM = 4  # two contact flags per foot

GROUP_NAMES: Tuple[str, ...] = ("body", "root", "feet")
GROUP_LAYOUT = {
    "body": (N_BODY_JOINTS, BODY_DIM),
    "root": (1, ROOT_DIM),
    "feet": (1, FEET_DIM),
}


@dataclass
class MotionSequence:
    """
    Heterogeneous per-frame skeleton tokens.

    body: (T, 21, 12), root: (T, 4), feet: (T, 4) binary contacts.
    """
    body: np.ndarray
    root: np.ndarray
    feet: np.ndarray
    fps: float = 20.0

    def __post_init__(self):
        self.body = np.asarray(self.body, dtype=np.float32)
        self.root = np.asarray(self.root, dtype=np.float32)
        self.feet = np.asarray(self.feet, dtype=np.float32)
        self.validate()

    @property
    def frame_count(self) -> int:
        return int(self.body.shape[0])

    def validate(self):
        """Check shapes, finiteness and binary contacts."""
        if self.body.ndim != 3 or self.body.shape[1:] != (N_BODY_JOINTS, BODY_DIM):
            raise LayoutMismatchError(
                f"body tokens must be (T, {N_BODY_JOINTS}, {BODY_DIM}), got {self.body.shape}")
        T = self.body.shape[0]
        if T < 1:
            raise DataError("motion must contain at least one frame")
        if self.root.shape != (T, ROOT_DIM):
            raise LayoutMismatchError(f"root token must be ({T}, {ROOT_DIM}), got {self.root.shape}")
        if self.feet.shape != (T, FEET_DIM):
            raise LayoutMismatchError(f"feet token must be ({T}, {FEET_DIM}), got {self.feet.shape}")
        if not (np.isfinite(self.body).all() and np.isfinite(self.root).all()):
            raise DataError("motion contains non-finite values")
        if not np.isin(self.feet, (0.0, 1.0)).all():
            raise DataError("feet contacts must be 0 or 1")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")

    def select_frames(self, indices: np.ndarray) -> "MotionSequence":
        return MotionSequence(
            body=self.body[indices],
            root=self.root[indices],
            feet=self.feet[indices],
            fps=self.fps,
        )

    def groups(self):
        """Yield (name, array) in serialization order."""
        yield "body", self.body
        yield "root", self.root
        yield "feet", self.feet


def downsample_indices(frame_count: int, max_frames: int) -> np.ndarray:
    """
    Uniformly spaced frame indices round(i*(T-1)/(max_frames-1)).

    Rounding is half-up, computed in integer arithmetic.
    """
    if max_frames < 2:
        raise ConfigError(f"max_frames must be >= 2, got {max_frames}")
    if frame_count <= max_frames:
        return np.arange(frame_count)
    i = np.arange(max_frames, dtype=np.int64)
    num = 2 * i * (frame_count - 1) + (max_frames - 1)
    return num // (2 * (max_frames - 1))


def downsample(motion: MotionSequence, max_frames: int) -> MotionSequence:
    """
    Cap a motion at max_frames by uniform index selection.

    Args:
        motion: Input motion
        max_frames: Frame cap (>= 2)

    Returns:
        The same object when already short enough, otherwise a new motion
        keeping the first and last frames.
    """
    if max_frames < 2:
        raise ConfigError(f"max_frames must be >= 2, got {max_frames}")
    if motion.frame_count <= max_frames:
        return motion
    return motion.select_frames(downsample_indices(motion.frame_count, max_frames))


def compute_velocities(positions: np.ndarray, fps: float) -> np.ndarray:
    """
    Backward finite-difference velocities.

    Args:
        positions: Joint positions (T, J, 3)
        fps: Frame rate

    Returns:
        Velocities (T, J, 3); the first frame replicates the second
        (zero for single-frame input).
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[0] < 1:
        raise DataError("velocities need at least one frame")
    if not np.isfinite(positions).all():
        raise DataError("positions contain non-finite values")

    velocities = np.zeros_like(positions)
    if positions.shape[0] == 1:
        return velocities
    velocities[1:] = (positions[1:] - positions[:-1]) * fps
    velocities[0] = velocities[1]
    return velocities


def compute_feet_contact(feet_velocity_magnitudes: np.ndarray, threshold: float) -> np.ndarray:
    """
    Binary foot contacts: 1 where the foot speed is below threshold.

    Args:
        feet_velocity_magnitudes: (T, 4) speed of the four foot joints
        threshold: Contact speed threshold (> 0)

    Returns:
        (T, 4) float32 array of 0/1 flags
    """
    if not threshold > 0:
        raise ConfigError(f"contact threshold must be positive, got {threshold}")
    magnitudes = np.asarray(feet_velocity_magnitudes)
    return (magnitudes < threshold).astype(np.float32)


def rotvec_to_rot6d(rotvecs: np.ndarray) -> np.ndarray:
    """
    Continuous 6D rotation encoding (first two matrix columns).

    Args:
        rotvecs: (..., 3) axis-angle vectors

    Returns:
        (..., 6) array
    """
    rotvecs = np.asarray(rotvecs, dtype=np.float64)
    lead = rotvecs.shape[:-1]
    matrices = Rotation.from_rotvec(rotvecs.reshape(-1, 3)).as_matrix()
    six = matrices[:, :, :2].transpose(0, 2, 1).reshape(-1, 6)
    return six.reshape(*lead, 6)


def positions_to_features(rifke: np.ndarray, rot6d: np.ndarray, fps: float) -> np.ndarray:
    """
    Assemble the 12-d body token per joint: rifke (3) + rot6d (6) + velocity (3).

    Args:
        rifke: (T, 21, 3) root-relative joint positions
        rot6d: (T, 21, 6) joint rotations
        fps: Frame rate for the velocity term

    Returns:
        (T, 21, 12) float32 body tokens
    """
    rifke = np.asarray(rifke, dtype=np.float64)
    rot6d = np.asarray(rot6d, dtype=np.float64)
    if rifke.shape[1:] != (N_BODY_JOINTS, 3) or rot6d.shape[1:] != (N_BODY_JOINTS, 6):
        raise LayoutMismatchError(
            f"expected rifke (T, 21, 3) and rot6d (T, 21, 6), got {rifke.shape} and {rot6d.shape}")
    velocities = compute_velocities(rifke, fps)
    return np.concatenate([rifke, rot6d, velocities], axis=-1).astype(np.float32)
