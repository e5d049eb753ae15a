"""
Training: configuration, batching, the optimization loop and evaluation helpers.
"""

from .config import DTYPES, TeacherConfig, TrainConfig
from .batching import PairBatch, epoch_seed, make_batches
from .history import MetricHistory, plot_history
from .model import (
    RetrievalModel,
    init_uniform_fan_in,
    build_model,
    save_model,
    load_model,
    embed_motions,
    embed_texts,
)
from .evaluation import EvalSettings, split_features, evaluate
from .trainer import LAST_CHECKPOINT, BEST_CHECKPOINT, TrainResult, Trainer, train

__all__ = [
    'DTYPES', 'TeacherConfig', 'TrainConfig',
    'PairBatch', 'epoch_seed', 'make_batches',
    'MetricHistory', 'plot_history',
    'RetrievalModel', 'init_uniform_fan_in', 'build_model', 'save_model', 'load_model',
    'embed_motions', 'embed_texts',
    'EvalSettings', 'split_features', 'evaluate',
    'LAST_CHECKPOINT', 'BEST_CHECKPOINT', 'TrainResult', 'Trainer', 'train',
]
