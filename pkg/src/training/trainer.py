"""
Training Loop Module
Seeded joint-dataset training of both encoders, the VAE decoder and the
contrastive temperature under the configured retrieval objective.
"""

import math
import shutil
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import torch
from loguru import logger

from src.analysis.protocols import protocol_all
from src.common.errors import DataError, DivergenceError
from src.data.manifest import Dataset, Split
from src.losses.cccl import LossBreakdown
from src.models.generative_head import loss_kl, loss_reconstruction, reparameterize, sample_noise
from src.models.motion_encoder import collate_motions
from src.models.teacher import TeacherModel, build_teacher, teacher_matrix
from src.models.text_encoder import Vocabulary, collate_tokens, tokenize
from .batching import PairBatch, epoch_seed, make_batches
from .config import TrainConfig
from .evaluation import split_features
from .history import MetricHistory, plot_history
from .model import RetrievalModel, build_model, save_model

LAST_CHECKPOINT = "last.ckpt"
BEST_CHECKPOINT = "best.ckpt"


@dataclass
class TrainResult:
    model: RetrievalModel
    history: MetricHistory
    epoch_losses: List[Dict[str, float]] = field(default_factory=list)
    checkpoint: Optional[Path] = None
    best_checkpoint: Optional[Path] = None
    best_rsum: Optional[float] = None


class Trainer:
    """
    Owns the model, optimizer, teacher and seeded random streams of one run.
    """

    def __init__(self, config: TrainConfig, dataset: Dataset, out_dir: Optional[Union[str, Path]] = None,
                 teacher: Optional[TeacherModel] = None):
        """
        Initialize a training run.

        Args:
            config: Run configuration
            dataset: Single or joint dataset; its train split is used for optimization
            out_dir: Directory for checkpoints, history and plot (None keeps everything in memory)
            teacher: Pre-built teacher; built from config.teacher when needed and absent
        """
        self.config = config
        self.dataset = dataset
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        corpus = dataset.texts(Split.TRAIN)
        if not corpus:
            raise DataError(f"dataset {dataset.name!r} has no train pairs")
        self.vocab = Vocabulary.build(corpus)

        self.teacher = teacher
        if self.teacher is None and config.loss.needs_teacher:
            self.teacher = build_teacher(config.teacher.kind, corpus, config.teacher.path)

        self.model = build_model(config, self.vocab)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=config.learning_rate,
                                          betas=(0.9, 0.999), eps=1e-8)
        self.noise_generator = torch.Generator().manual_seed(config.seed)
        self.history = MetricHistory(self.out_dir / "history.jsonl" if self.out_dir else None)

        self.eval_split = next((s for s in (Split.VAL, Split.TEST) if dataset.split(s)), None)
        self.best_rsum = -math.inf
        logger.info(f"Training on {dataset.name!r}: {len(dataset.split(Split.TRAIN))} train pairs, "
                    f"vocabulary {len(self.vocab)}, loss mode {config.loss.mode}")

    def _teacher_sim(self, texts: List[str]) -> Optional[torch.Tensor]:
        if self.teacher is None:
            return None
        sim = teacher_matrix(texts, self.teacher)
        return torch.as_tensor(np.asarray(sim), dtype=self.config.torch_dtype)

    def compute_loss(self, batch: PairBatch, lam: float) -> LossBreakdown:
        """Retrieval objective plus the weighted reconstruction and KL regularizers."""
        cfg = self.config
        motions = collate_motions([p.motion for p in batch.pairs], max_frames=cfg.motion_encoder.max_frames,
                                  dtype=cfg.torch_dtype)
        tokens = collate_tokens([tokenize(t, self.vocab) for t in batch.texts])

        motion_g = self.model.motion_encoder(motions)
        text_g = self.model.text_encoder(tokens)

        teacher_sim = None
        if cfg.loss.mode == "infonce_f" or cfg.loss.filter_in_cccl or lam < 1.0:
            teacher_sim = self._teacher_sim(batch.texts)
        breakdown = self.model.loss(text_g.mu, motion_g.mu, teacher_sim, lam)

        sample = reparameterize(motion_g, sample_noise(motion_g, self.noise_generator))
        reconstruction = self.model.decoder(sample.z, motions.mask)
        rec = loss_reconstruction(motions, reconstruction)
        kl = loss_kl(motion_g, text_g, cfg.loss.kl)

        breakdown.rec = rec
        breakdown.kl = kl
        breakdown.total = breakdown.total + cfg.loss.lambda_rec * rec + cfg.loss.lambda_kl * kl
        return breakdown

    def train_epoch(self, epoch: int) -> Dict[str, float]:
        """One pass over the train split; returns the mean of every loss term."""
        self.model.train()
        lam = self.model.loss.lambda_for_epoch(epoch, self.config.swipe)
        batches = make_batches(self.dataset, self.config.batch_size, epoch_seed(self.config.seed, epoch))

        sums = defaultdict(float)
        for step, batch in enumerate(batches):
            try:
                breakdown = self.compute_loss(batch, lam)
            except DivergenceError as e:
                raise DivergenceError(str(e), epoch=epoch, step=step) from e
            if not torch.isfinite(breakdown.total):
                raise DivergenceError("non-finite training loss", epoch=epoch, step=step)

            self.optimizer.zero_grad()
            breakdown.total.backward()
            self.optimizer.step()

            for term, value in breakdown.as_floats().items():
                sums[term] += value
                self.history.log(epoch, term, value, step=step)
                logger.bind(epoch=epoch, step=step, term=term, value=value).trace(f"{term}={value:.6f}")

        means = {term: total / len(batches) for term, total in sums.items()}
        means["lambda"] = lam
        means["tau"] = float(self.model.loss.tau.detach())
        for term, value in means.items():
            self.history.log(epoch, term, value)
        return means

    def validate(self, epoch: int) -> Optional[float]:
        """protocol_all Rsum on the held-out split, tracking the best checkpoint."""
        if self.eval_split is None:
            return None
        _, t_feats, m_feats, _ = split_features(self.model, self.dataset, self.eval_split)
        rsum = protocol_all(t_feats, m_feats).rsum
        self.history.log(epoch, f"{self.eval_split.value}_rsum", rsum)
        if rsum > self.best_rsum:
            self.best_rsum = rsum
            if self.out_dir is not None:
                shutil.copyfile(self.out_dir / LAST_CHECKPOINT, self.out_dir / BEST_CHECKPOINT)
            logger.info(f"Epoch {epoch}: new best {self.eval_split.value} Rsum {rsum:.2f}")
        return rsum

    def save(self, epoch: int) -> Optional[Path]:
        if self.out_dir is None:
            return None
        return save_model(self.model, self.out_dir / LAST_CHECKPOINT, extra={
            "epoch": epoch,
            "dataset": self.dataset.name,
            "provenance": self.dataset.provenance,
        })

    def run(self) -> TrainResult:
        cfg = self.config
        result = TrainResult(model=self.model, history=self.history)
        for epoch in range(1, cfg.epochs + 1):
            means = self.train_epoch(epoch)
            result.epoch_losses.append(means)
            result.checkpoint = self.save(epoch)
            logger.bind(epoch=epoch).info(
                f"Epoch {epoch}/{cfg.epochs}: total {means['total']:.4f} nce {means['nce']:.4f} "
                f"lambda {means['lambda']:.2f}")

            if cfg.eval_every and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                self.validate(epoch)

        if self.best_rsum > -math.inf:
            result.best_rsum = self.best_rsum
            if self.out_dir is not None:
                result.best_checkpoint = self.out_dir / BEST_CHECKPOINT
        if self.out_dir is not None:
            plot_history(self.history, self.out_dir / "history.png")
        self.model.eval()
        return result


def train(config: TrainConfig, dataset: Dataset, out_dir: Optional[Union[str, Path]] = None,
          teacher: Optional[TeacherModel] = None) -> TrainResult:
    """Train a model; see Trainer."""
    return Trainer(config, dataset, out_dir, teacher).run()
