"""
Shared fixtures: a small synthetic corpus, a tiny float64 model config and
a saved (untrained) checkpoint built from them.
"""

from pathlib import Path

import pytest
from loguru import logger

from src.data.manifest import write_manifest
from src.data.synthetic import synth_dataset
from src.losses.cccl import SwipeConfig
from src.models.config import DecoderConfig, MotionEncoderConfig, TextEncoderConfig
from src.models.text_encoder import Vocabulary
from src.training.config import TrainConfig
from src.training.model import build_model, save_model

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(autouse=True)
def quiet_logging():
    logger.remove()
    logger.add(lambda _: None, level="WARNING")
    yield
    logger.remove()


def make_tiny_config(**overrides) -> TrainConfig:
    values = dict(
        epochs=2,
        batch_size=8,
        learning_rate=1e-3,
        seed=0,
        dtype="float64",
        eval_every=0,
        swipe=SwipeConfig(1, 3),
        motion_encoder=MotionEncoderConfig(depth=2, heads=2, ffn_width=16, model_width=8,
                                           latent_dim=8, dropout=0.0),
        text_encoder=TextEncoderConfig(depth=2, heads=2, ffn_width=16, model_width=8,
                                       latent_dim=8, dropout=0.0),
        decoder=DecoderConfig(depth=1, heads=2, ffn_width=16, model_width=8, dropout=0.0),
    )
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return make_tiny_config()


@pytest.fixture
def small_dataset():
    """16 pairs over 4 archetypes; one pair per archetype is held out for test."""
    return synth_dataset(7, 16, 4, test_fraction=0.25, min_frames=8, max_frames=12)


@pytest.fixture
def manifest_path(tmp_path, small_dataset) -> Path:
    return write_manifest(small_dataset, tmp_path / "data" / "manifest.jsonl")


@pytest.fixture
def checkpoint_path(tmp_path, tiny_config, small_dataset) -> Path:
    vocab = Vocabulary.build(small_dataset.texts("train"))
    model = build_model(tiny_config, vocab)
    return save_model(model, tmp_path / "model.ckpt")
