"""Training-time augmentation: context-size sampling and CoWord dropout.

CoWord dropout masks tokens of the current source sentence only. Context
sentences and the target side are never touched, which is what makes the
mask informative: the model can recover the masked word from context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .bpe import MASK_ID, Tokenizer
from .corpus import ParallelCorpus, TranslationExample, assemble_example
from .errors import ConfigurationError

CONTEXT_SIDES = ("source", "target", "both")


@dataclass(frozen=True)
class AugmentConfig:
    coword_p: float = 0.0
    k_min: int = 0
    k_max: int = 4
    context_side: str = "target"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.coword_p <= 1.0:
            raise ConfigurationError(f"coword_p={self.coword_p} outside [0, 1]")
        if self.k_min < 0 or self.k_max < self.k_min:
            raise ConfigurationError(
                f"need 0 <= k_min <= k_max, got k_min={self.k_min} k_max={self.k_max}"
            )
        if self.context_side not in CONTEXT_SIDES:
            raise ConfigurationError(
                f"context_side must be one of {CONTEXT_SIDES}, got {self.context_side!r}"
            )


def coword_dropout(
    example: TranslationExample, p: float, rng: np.random.Generator
) -> TranslationExample:
    """Independently replace each current-source token by <mask> with prob p.

    Always draws len(src) uniforms, even for p == 0, so the RNG stream does
    not depend on p and runs differing only in p see identical context sizes.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"dropout probability {p} outside [0, 1]")
    draws = rng.random(len(example.src))
    if p == 0.0:
        return example
    masked = tuple(
        MASK_ID if u < p else t for t, u in zip(example.src, draws)
    )
    return TranslationExample(
        src=masked,
        tgt=example.tgt,
        src_context=example.src_context,
        tgt_context=example.tgt_context,
    )


def sample_context_size(rng: np.random.Generator, cfg: AugmentConfig) -> int:
    return int(rng.integers(cfg.k_min, cfg.k_max + 1))


def context_sizes_for_side(k: int, side: str) -> tuple[int, int]:
    """Map a sampled k onto (k_src, k_tgt) for the configured side."""
    if side == "source":
        return k, 0
    if side == "target":
        return 0, k
    if side == "both":
        return k, k
    raise ConfigurationError(f"unknown context side {side!r}")


def build_training_stream(
    corpus: ParallelCorpus,
    tok: Tokenizer,
    cfg: AugmentConfig,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[TranslationExample]:
    """Yield one augmented example per sentence, in corpus order.

    Per example the RNG is consumed in a fixed order: one integer draw for
    the context size, then len(src) uniforms for the dropout mask. The
    stream is a pure function of (corpus, cfg, rng state).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    for doc in corpus:
        for i in range(len(doc)):
            k = sample_context_size(rng, cfg)
            k_src, k_tgt = context_sizes_for_side(k, cfg.context_side)
            ex = assemble_example(doc, i, k_src, k_tgt, tok)
            yield coword_dropout(ex, cfg.coword_p, rng)
