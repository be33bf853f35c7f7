"""A small encoder-decoder transformer that scores context-bearing examples.

The network itself is standard (pre-norm layers, learned positions, shared
input embedding). Context handling lives entirely in the input layout:
context sentences are concatenated onto both streams with <brk>/<sep>
markers, and only the current-sentence positions are ever scored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from ..bpe import BOS_ID, EOS_ID, PAD_ID, Tokenizer
from ..corpus import TranslationExample, flatten_with_context
from ..errors import ConfigurationError, ScoringError

_SCORE_BATCH = 64


@dataclass(frozen=True)
class ToyTransformerConfig:
    vocab_size: int
    layers: int = 2
    heads: int = 4
    model_dim: int = 128
    ff_dim: int = 256
    max_positions: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if self.vocab_size < 8:
            raise ConfigurationError("vocab_size must cover the reserved specials")
        if min(self.layers, self.heads, self.model_dim, self.ff_dim) < 1:
            raise ConfigurationError("model dimensions must be positive")
        if self.model_dim % self.heads != 0:
            raise ConfigurationError(
                f"model_dim={self.model_dim} not divisible by heads={self.heads}"
            )
        if self.max_positions < 2:
            raise ConfigurationError("max_positions must be at least 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout={self.dropout} outside [0, 1)")


class ContextTransformer(nn.Module):
    def __init__(self, cfg: ToyTransformerConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.model_dim, padding_idx=PAD_ID)
        self.enc_pos = nn.Embedding(cfg.max_positions, cfg.model_dim)
        self.dec_pos = nn.Embedding(cfg.max_positions, cfg.model_dim)
        self.drop = nn.Dropout(cfg.dropout)
        self.scale = cfg.model_dim**0.5
        enc_layer = nn.TransformerEncoderLayer(
            d_model=cfg.model_dim,
            nhead=cfg.heads,
            dim_feedforward=cfg.ff_dim,
            dropout=cfg.dropout,
            batch_first=True,
            norm_first=True,
        )
        dec_layer = nn.TransformerDecoderLayer(
            d_model=cfg.model_dim,
            nhead=cfg.heads,
            dim_feedforward=cfg.ff_dim,
            dropout=cfg.dropout,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            enc_layer,
            cfg.layers,
            norm=nn.LayerNorm(cfg.model_dim),
            enable_nested_tensor=False,
        )
        self.decoder = nn.TransformerDecoder(
            dec_layer, cfg.layers, norm=nn.LayerNorm(cfg.model_dim)
        )
        self.out_proj = nn.Linear(cfg.model_dim, cfg.vocab_size)

    def _embed(self, ids: torch.Tensor, pos_table: nn.Embedding) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.drop(self.embed(ids) * self.scale + pos_table(positions))

    def forward(
        self,
        src_ids: torch.Tensor,
        dec_in: torch.Tensor,
        src_pad: torch.Tensor,
        dec_pad: torch.Tensor,
    ) -> torch.Tensor:
        """(B, S), (B, T) id tensors with boolean pad masks -> (B, T, V) logits."""
        causal = nn.Transformer.generate_square_subsequent_mask(
            dec_in.shape[1], device=dec_in.device, dtype=torch.bool
        )
        memory = self.encoder(
            self._embed(src_ids, self.enc_pos), src_key_padding_mask=src_pad
        )
        hidden = self.decoder(
            self._embed(dec_in, self.dec_pos),
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=dec_pad,
            memory_key_padding_mask=src_pad,
        )
        return self.out_proj(hidden)


def example_tensors(example: TranslationExample, max_positions: int):
    """Lay out one example: encoder ids, decoder input ids, and the label ids
    aligned with the decoder positions that get scored.

    Decoder input is <bos> then the flattened target stream; the scored
    region is the final len(tgt) + 1 positions (current tokens plus <eos>),
    so context positions never contribute to scores or training loss.
    """
    enc = flatten_with_context(example.src_context, example.src)
    if not enc:
        enc = [PAD_ID]  # a lone real token keeps cross-attention well defined
    dec_flat = flatten_with_context(example.tgt_context, example.tgt)
    dec_in = [BOS_ID] + dec_flat
    labels = dec_flat + [EOS_ID]
    n_scored = len(example.tgt) + 1
    if len(enc) > max_positions:
        raise ScoringError(
            f"encoder input of {len(enc)} tokens exceeds max_positions={max_positions}"
        )
    if len(dec_in) > max_positions:
        raise ScoringError(
            f"decoder input of {len(dec_in)} tokens exceeds max_positions={max_positions}"
        )
    return enc, dec_in, labels, n_scored


def _pad_batch(rows: list[list[int]], device) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(r) for r in rows)
    ids = torch.full((len(rows), width), PAD_ID, dtype=torch.long, device=device)
    pad = torch.ones((len(rows), width), dtype=torch.bool, device=device)
    for i, r in enumerate(rows):
        ids[i, : len(r)] = torch.tensor(r, dtype=torch.long, device=device)
        pad[i, : len(r)] = False
    return ids, pad


class TransformerScorer:
    """ScoringModel view of a trained ContextTransformer.

    Scoring always runs in eval mode under no_grad, so identical inputs give
    identical outputs regardless of how the module was left configured.
    """

    def __init__(
        self,
        module: ContextTransformer,
        tokenizer_sha256: Optional[str] = None,
        trained_context: Optional[dict] = None,
    ):
        torch.set_num_threads(1)
        self.module = module
        self.cfg = module.cfg
        self.vocab_size = module.cfg.vocab_size
        self.tokenizer_sha256 = tokenizer_sha256
        self.trained_context = trained_context
        self.train_log: list[dict] = []

    def _check_ids(self, example: TranslationExample) -> None:
        seqs = (
            (example.src, example.tgt)
            + example.src_context
            + example.tgt_context
        )
        for seq in seqs:
            for t in seq:
                if not 0 <= t < self.vocab_size:
                    raise ScoringError(
                        f"token id {t} outside vocabulary of {self.vocab_size}"
                    )

    def _forward_batch(
        self, examples: Sequence[TranslationExample]
    ) -> tuple[torch.Tensor, list[list[int]], list[int]]:
        encs, decs, labels, scored = [], [], [], []
        for ex in examples:
            self._check_ids(ex)
            e, d, l, n = example_tensors(ex, self.cfg.max_positions)
            encs.append(e)
            decs.append(d)
            labels.append(l)
            scored.append(n)
        device = next(self.module.parameters()).device
        src_ids, src_pad = _pad_batch(encs, device)
        dec_ids, dec_pad = _pad_batch(decs, device)
        self.module.eval()
        with torch.no_grad():
            logits = self.module(src_ids, dec_ids, src_pad, dec_pad)
            logprobs = torch.log_softmax(logits.double(), dim=-1)
        return logprobs, labels, scored

    def score_batch(
        self, examples: Sequence[TranslationExample]
    ) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for lo in range(0, len(examples), _SCORE_BATCH):
            chunk = examples[lo : lo + _SCORE_BATCH]
            logprobs, labels, scored = self._forward_batch(chunk)
            for b, (lab, n) in enumerate(zip(labels, scored)):
                rows = logprobs[b, : len(lab)]
                picked = rows[torch.arange(len(lab)), torch.tensor(lab)]
                out.append(picked[len(lab) - n :].cpu().numpy())
        return out

    def score(self, example: TranslationExample) -> np.ndarray:
        return self.score_batch([example])[0]

    def distributions(self, example: TranslationExample) -> np.ndarray:
        logprobs, labels, scored = self._forward_batch([example])
        lab, n = labels[0], scored[0]
        rows = logprobs[0, : len(lab)]
        return rows[len(lab) - n :].cpu().numpy()
