"""
Epoch batching over the (joint) training split.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from src.common.errors import DataError
from src.data.manifest import Dataset, Split, TextMotionPair


@dataclass
class PairBatch:
    pairs: List[TextMotionPair]
    texts: List[str]  # one sampled caption per pair

    def __len__(self) -> int:
        return len(self.pairs)


def epoch_seed(seed: int, epoch: int) -> int:
    """Independent, reproducible seed for one epoch of a run."""
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def make_batches(dataset: Dataset, batch_size: int, seed: int) -> List[PairBatch]:
    """
    Shuffle the train split and cut it into full batches.

    One caption per pair is drawn uniformly; sources mix freely; the last
    partial batch is dropped.

    Raises:
        DataError: Fewer train pairs than batch_size
    """
    pairs = dataset.split(Split.TRAIN)
    if len(pairs) < batch_size:
        raise DataError(f"train split has {len(pairs)} pairs, fewer than batch size {batch_size}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    captions = [int(rng.integers(len(pairs[i].texts))) for i in order]

    batches = []
    for start in range(0, len(order) - batch_size + 1, batch_size):
        idx = order[start:start + batch_size]
        choice = captions[start:start + batch_size]
        batch_pairs = [pairs[i] for i in idx]
        batches.append(PairBatch(
            pairs=batch_pairs,
            texts=[p.texts[c] for p, c in zip(batch_pairs, choice)],
        ))
    return batches
