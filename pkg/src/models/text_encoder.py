"""
Text Encoder Module
Word-level vocabulary, tokenization and the class-token transformer text
encoder that maps a description to a LatentGaussian.
"""

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

import torch
from einops import repeat
from torch import Tensor, nn

from src.common.errors import ConfigError, TextError
from .config import TextEncoderConfig
from .layers import TransformerLayer, sinusoidal_encoding
from .motion_encoder import N_CLS, LatentGaussian

PAD_TOKEN = "<pad>"
OOV_TOKEN = "<unk>"
PAD_ID = 0
OOV_ID = 1

_PUNCTUATION = re.compile(r"[^\w\s]", flags=re.UNICODE)


def normalize_text(text: str) -> List[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCTUATION.sub(" ", text.lower()).split()


@dataclass
class Vocabulary:
    """Word list; the index of a word is its id."""
    words: List[str] = field(default_factory=lambda: [PAD_TOKEN, OOV_TOKEN])

    def __post_init__(self):
        if self.words[:2] != [PAD_TOKEN, OOV_TOKEN]:
            raise ConfigError(f"vocabulary must start with {PAD_TOKEN!r}, {OOV_TOKEN!r}")
        self._index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def build(cls, corpus: Iterable[str], min_count: int = 1) -> "Vocabulary":
        """Vocabulary of every normalized word seen at least min_count times, sorted."""
        counts = Counter(word for text in corpus for word in normalize_text(text))
        words = sorted(w for w, c in counts.items() if c >= min_count)
        return cls(words=[PAD_TOKEN, OOV_TOKEN] + words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def id_of(self, word: str) -> int:
        return self._index.get(word, OOV_ID)

    def to_dict(self) -> Dict:
        return {"words": list(self.words)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Vocabulary":
        return cls(words=list(data["words"]))


@dataclass
class TokenizedText:
    token_ids: List[int]

    @property
    def length(self) -> int:
        return len(self.token_ids)


@dataclass
class TextBatch:
    ids: Tensor  # (B, L) long, PAD_ID at padding
    mask: Tensor  # (B, L) bool


def tokenize(text: str, vocab: Vocabulary) -> TokenizedText:
    """
    Map a text to word ids; unseen words become the OOV id.

    Raises:
        TextError: Text is empty after normalization
    """
    words = normalize_text(text)
    if not words:
        raise TextError(f"text is empty after normalization: {text!r}")
    return TokenizedText(token_ids=[vocab.id_of(w) for w in words])


def collate_tokens(texts: Sequence[TokenizedText], pad_to: Optional[int] = None) -> TextBatch:
    if not texts:
        raise ConfigError("cannot collate an empty list of texts")
    L = max(t.length for t in texts)
    if pad_to is not None:
        L = max(L, pad_to)
    ids = torch.full((len(texts), L), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(texts), L), dtype=torch.bool)
    for i, t in enumerate(texts):
        ids[i, : t.length] = torch.as_tensor(t.token_ids, dtype=torch.long)
        mask[i, : t.length] = True
    return TextBatch(ids=ids, mask=mask)


class TextEncoder(nn.Module):
    """Word embeddings + sinusoidal positions behind two class tokens."""

    def __init__(self, vocab_size: int, config: Optional[TextEncoderConfig] = None):
        super().__init__()
        self.config = config or TextEncoderConfig()
        cfg = self.config
        width = cfg.model_width

        self.vocab_size = vocab_size
        self.embedding = nn.Embedding(vocab_size, width, padding_idx=PAD_ID)
        self.cls_tokens = nn.Parameter(torch.randn(N_CLS, width) * 0.02)
        self.layers = nn.ModuleList(
            [TransformerLayer(width, cfg.heads, cfg.ffn_width, cfg.dropout) for _ in range(cfg.depth)])
        self.final_norm = nn.LayerNorm(width)
        self.mu_head = nn.Linear(width, cfg.latent_dim)
        self.log_var_head = nn.Linear(width, cfg.latent_dim)

    def forward(self, batch: TextBatch) -> LatentGaussian:
        words = self.embedding(batch.ids)
        B, L, D = words.shape
        words = words + sinusoidal_encoding(L, D, dtype=words.dtype, device=words.device)[None]
        words = words * batch.mask[..., None].to(words.dtype)

        x = torch.cat([repeat(self.cls_tokens, "c d -> b c d", b=B), words], dim=1)
        mask = torch.cat([torch.ones(B, N_CLS, dtype=torch.bool, device=batch.mask.device), batch.mask], dim=1)
        for layer in self.layers:
            x = layer(x, mask)

        cls = self.final_norm(x[:, :N_CLS])
        return LatentGaussian(mu=self.mu_head(cls[:, 0]), log_var=self.log_var_head(cls[:, 1]))


def encode_text(text: Union[TokenizedText, Sequence[TokenizedText], TextBatch],
                encoder: TextEncoder) -> LatentGaussian:
    if isinstance(text, TextBatch):
        batch = text
    elif isinstance(text, TokenizedText):
        batch = collate_tokens([text])
    else:
        batch = collate_tokens(list(text))
    return encoder(batch)
