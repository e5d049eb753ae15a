"""
Synthetic text-motion corpus.

Each pair is drawn from a motion archetype (a parametric limb-swing pattern
plus a linear root path). Its description names the archetype verb and the
pair attributes (direction, speed, amplitude) that the motion realizes, so
texts are grounded in their motions and same-archetype texts share words.
"""

import itertools
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.common.errors import ConfigError
from .manifest import Dataset, Source, Split, TextMotionPair
from .motion import (
    MotionSequence,
    compute_feet_contact,
    compute_velocities,
    positions_to_features,
    rotvec_to_rot6d,
)

ARCHETYPE_VERBS: Tuple[Tuple[str, str], ...] = (
    ("walk", "walks"),
    ("wave", "waves an arm"),
    ("kick", "kicks a leg"),
    ("jump", "jumps up"),
    ("spin", "spins around"),
    ("crawl", "crawls on the ground"),
    ("stretch", "stretches the torso"),
    ("dance", "dances rhythmically"),
)
ARCHETYPE_MANNERS: Tuple[str, ...] = ("stiffly", "loosely", "carefully", "energetically", "lazily", "awkwardly")

DIRECTIONS = (("forward", 0.0), ("backward", np.pi), ("to the left", np.pi / 2), ("to the right", -np.pi / 2))
SPEEDS = (("slowly", 0.6), ("steadily", 1.0), ("quickly", 1.6))
SIZES = (("small", 0.5), ("medium", 1.0), ("large", 1.5))
SUBJECTS = ("a person", "someone", "a man", "a woman")

# Body joint index -> (part, depth along the kinematic chain)
# parts: 0 left leg, 1 right leg, 2 torso+head, 3 left arm, 4 right arm
_JOINT_PART = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 3, 4, 2, 3, 4, 3, 4, 3, 4])
_JOINT_DEPTH = np.array([1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 1, 1, 5, 2, 2, 3, 3, 4, 4], dtype=np.float64)

# Rest pose, root-relative (meters)
REST_POSE = np.array([
    [0.08, -0.08, 0.0], [-0.08, -0.08, 0.0], [0.0, 0.10, 0.0],
    [0.10, -0.45, 0.0], [-0.10, -0.45, 0.0], [0.0, 0.25, 0.0],
    [0.10, -0.85, 0.0], [-0.10, -0.85, 0.0], [0.0, 0.40, 0.0],
    [0.10, -0.90, 0.10], [-0.10, -0.90, 0.10], [0.0, 0.55, 0.0],
    [0.08, 0.50, 0.0], [-0.08, 0.50, 0.0], [0.0, 0.65, 0.0],
    [0.18, 0.50, 0.0], [-0.18, 0.50, 0.0], [0.42, 0.50, 0.0],
    [-0.42, 0.50, 0.0], [0.65, 0.50, 0.0], [-0.65, 0.50, 0.0],
])

# left ankle, left foot, right ankle, right foot
FOOT_JOINTS = (6, 9, 7, 10)
CONTACT_THRESHOLD = 0.15
NOISE_STD = 0.005


@dataclass
class Archetype:
    """Parametric motion pattern shared by all pairs of one class"""
    name: str
    verb: str
    frequency: float  # Hz
    part_weights: np.ndarray  # (5,)
    part_phases: np.ndarray  # (5,)
    swing_axis: np.ndarray  # (3,) unit
    root_speed: float
    spin_rate: float
    bounce: float


def make_archetypes(seed: int, n_archetypes: int) -> List[Archetype]:
    """
    Build n_archetypes distinct archetypes.

    The first len(ARCHETYPE_VERBS) use the plain verbs; later ones cycle
    through the verbs again with a manner adverb ("walk-2", "walks stiffly"),
    so any count yields unique names and distinguishable captions.
    """
    archetypes = []
    for k in range(n_archetypes):
        rng = np.random.default_rng([seed, k])
        weights = rng.uniform(0.05, 0.3, size=5)
        weights[k % 5] = 1.0
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        base, verb = ARCHETYPE_VERBS[k % len(ARCHETYPE_VERBS)]
        cycle = k // len(ARCHETYPE_VERBS)
        name = base
        if cycle:
            name = f"{base}-{cycle + 1}"
            verb = f"{verb} {ARCHETYPE_MANNERS[(cycle - 1) % len(ARCHETYPE_MANNERS)]}"
        archetypes.append(Archetype(
            name=name,
            verb=verb,
            frequency=float(rng.uniform(0.5, 2.0)),
            part_weights=weights,
            part_phases=rng.uniform(0, 2 * np.pi, size=5),
            swing_axis=axis,
            root_speed=float(rng.uniform(0.2, 1.2)),
            spin_rate=float(rng.uniform(-1.0, 1.0)) if base == "spin" else 0.0,
            bounce=float(rng.uniform(0.0, 0.1)),
        ))
    return archetypes


def synthesize_motion(archetype: Archetype, n_frames: int, fps: float, direction: float,
                      speed: float, size: float, phase: float,
                      rng: np.random.Generator) -> MotionSequence:
    """
    Render one motion of an archetype with the given attributes.

    Args:
        archetype: Motion pattern
        n_frames: Frame count
        fps: Frame rate
        direction: Root heading on the ground plane (radians)
        speed: Tempo multiplier (limb frequency and root speed)
        size: Swing amplitude multiplier
        phase: Per-pair phase offset
        rng: Noise source

    Returns:
        MotionSequence in the common layout
    """
    t = np.arange(n_frames) / fps
    omega = 2 * np.pi * archetype.frequency * speed
    # (T, 21) swing angle per joint
    angles = (0.4 * size * archetype.part_weights[_JOINT_PART][None, :]
              * np.sin(omega * t[:, None] + archetype.part_phases[_JOINT_PART][None, :] + phase))

    rotvecs = angles[..., None] * archetype.swing_axis[None, None, :]
    rot6d = rotvec_to_rot6d(rotvecs)

    offset = 0.1 * _JOINT_DEPTH[None, :, None] * angles[..., None] * archetype.swing_axis[None, None, :]
    bounce = archetype.bounce * size * np.abs(np.sin(omega * t))
    rifke = REST_POSE[None, :, :] + offset
    rifke[:, :, 1] += bounce[:, None]
    rifke += rng.normal(scale=NOISE_STD, size=rifke.shape)

    body = positions_to_features(rifke, rot6d, fps)

    planar = archetype.root_speed * speed
    root = np.zeros((n_frames, 4))
    root[:, 0] = archetype.spin_rate * speed
    root[:, 1] = planar * np.cos(direction)
    root[:, 2] = planar * np.sin(direction)
    root[:, 3] = 0.9 + bounce

    foot_speed = np.linalg.norm(compute_velocities(rifke[:, list(FOOT_JOINTS), :], fps), axis=-1)
    feet = compute_feet_contact(foot_speed, CONTACT_THRESHOLD)

    return MotionSequence(body=body, root=root.astype(np.float32), feet=feet, fps=fps)


def synth_dataset(seed: int, n_pairs: int, n_motion_archetypes: int,
                  test_fraction: float = 0.0, min_frames: int = 40, max_frames: int = 80,
                  fps: float = 20.0, source: Source = Source.SYNTHETIC) -> Dataset:
    """
    Generate a deterministic synthetic dataset.

    Pair i belongs to archetype i mod k; its label is the archetype name.

    Args:
        seed: Generator seed
        n_pairs: Number of pairs (>= 1)
        n_motion_archetypes: Number of classes (>= 2)
        test_fraction: Share of each archetype's pairs put in the test split
        min_frames: Shortest motion
        max_frames: Longest motion
        fps: Frame rate
        source: Source tag for every pair

    Returns:
        Dataset with in-memory motions
    """
    if n_pairs < 1:
        raise ConfigError(f"n_pairs must be >= 1, got {n_pairs}")
    if n_motion_archetypes < 2:
        raise ConfigError(f"n_motion_archetypes must be >= 2, got {n_motion_archetypes}")
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in [0, 1), got {test_fraction}")
    if not 1 <= min_frames <= max_frames:
        raise ConfigError(f"invalid frame range [{min_frames}, {max_frames}]")

    archetypes = make_archetypes(seed, n_motion_archetypes)
    rng = np.random.default_rng(seed)

    # Attribute combinations per archetype, without replacement while they last
    combos = list(itertools.product(range(len(DIRECTIONS)), range(len(SPEEDS)), range(len(SIZES))))
    pools = {k: [combos[i] for i in rng.permutation(len(combos))] for k in range(n_motion_archetypes)}
    counts = {k: len(range(k, n_pairs, n_motion_archetypes)) for k in range(n_motion_archetypes)}
    n_test = {k: int(round(test_fraction * counts[k])) for k in counts}
    seen = {k: 0 for k in counts}

    pairs = []
    for i in range(n_pairs):
        k = i % n_motion_archetypes
        archetype = archetypes[k]
        pool = pools[k]
        d, s, a = pool.pop() if pool else combos[rng.integers(len(combos))]
        direction_word, heading = DIRECTIONS[d]
        speed_word, speed = SPEEDS[s]
        size_word, size = SIZES[a]

        n_frames = int(rng.integers(min_frames, max_frames + 1))
        phase = float(rng.uniform(0, 2 * np.pi))
        motion = synthesize_motion(archetype, n_frames, fps, heading, speed, size, phase, rng)

        subjects = rng.choice(len(SUBJECTS), size=2, replace=False)
        texts = [
            f"{SUBJECTS[subjects[0]]} {archetype.verb} {speed_word} {direction_word} with {size_word} steps",
            f"{SUBJECTS[subjects[1]]} {speed_word} {archetype.verb} {direction_word}, {size_word} movements",
        ]

        split = Split.TEST if seen[k] < n_test[k] else Split.TRAIN
        seen[k] += 1
        pairs.append(TextMotionPair(
            id=f"s{i:05d}",
            texts=texts,
            source=source,
            split=split,
            label=archetype.name,
            _motion=motion,
        ))

    return Dataset(name=f"synthetic-{seed}", pairs=pairs)
