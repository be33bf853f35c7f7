"""Document-level decoding with rolling context windows.

Source context comes from the gold preceding source sentences; target
context is the model's own earlier output, so translation errors can
propagate forward exactly as they would in deployment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..bpe import EOS_ID, Tokenizer
from ..corpus import TranslationExample
from ..errors import ConfigurationError
from .scoring import ScoringModel


@dataclass(frozen=True)
class ContextPolicy:
    src_size: int = 0
    tgt_size: int = 0

    def __post_init__(self):
        if self.src_size < 0 or self.tgt_size < 0:
            raise ConfigurationError("context sizes must be non-negative")


def _decode_sentence(
    model: ScoringModel,
    src: tuple[int, ...],
    src_context: tuple[tuple[int, ...], ...],
    tgt_context: tuple[tuple[int, ...], ...],
    beam_size: int,
    max_len: int,
) -> tuple[int, ...]:
    """Beam search over next-token distributions; beam_size 1 is greedy.

    Hypotheses are compared by total log-probability, never normalised by
    length. Ties break toward the lower token id, then the older hypothesis,
    so decoding is deterministic. A sentence must emit at least one token
    before <eos> whenever the model allows it: an empty hypothesis would be
    indistinguishable from a document separator in the text output.
    """
    # (ids, score, finished)
    beams: list[tuple[tuple[int, ...], float, bool]] = [((), 0.0, False)]
    for _ in range(max_len + 1):
        if all(b[2] for b in beams):
            break
        candidates: list[tuple[float, tuple[int, ...], int, bool]] = []
        for ids, score, finished in beams:
            if finished:
                candidates.append((score, ids, -1, True))
                continue
            if len(ids) >= max_len:
                # ran into the length cap without <eos>: force-finish as is
                candidates.append((score, ids, -1, True))
                continue
            ex = TranslationExample(
                src=src,
                tgt=ids,
                src_context=src_context,
                tgt_context=tgt_context,
            )
            row = model.distributions(ex)[-1]
            order = np.argsort(-row, kind="stable")[: beam_size + 1]
            for token_id in order:
                lp = float(row[token_id])
                if lp == -np.inf:
                    continue
                token_id = int(token_id)
                if token_id == EOS_ID:
                    if not ids:
                        continue  # enforce a minimum length of one token
                    candidates.append((score + lp, ids, token_id, True))
                else:
                    candidates.append((score + lp, ids + (token_id,), token_id, False))
        if not candidates:
            break
        candidates.sort(key=lambda c: (-c[0], c[2]))
        beams = [(ids, score, fin) for score, ids, _, fin in candidates[:beam_size]]
    # force-finish anything that ran into max_len
    best = max(enumerate(beams), key=lambda ib: (ib[1][1], -ib[0]))[1]
    return best[0]


def decode_document(
    model: ScoringModel,
    src_sentences: Sequence[str],
    tok: Tokenizer,
    policy: ContextPolicy = ContextPolicy(),
    beam_size: int = 1,
    max_len: Optional[int] = None,
) -> list[str]:
    """Translate a document sentence by sentence. Returns decoded strings."""
    if beam_size < 1:
        raise ConfigurationError(f"beam_size must be >= 1, got {beam_size}")
    src_ids = [tuple(tok.encode(s)) for s in src_sentences]
    decoded: list[tuple[int, ...]] = []
    out: list[str] = []
    for i, src in enumerate(src_ids):
        src_ctx = tuple(src_ids[max(0, i - policy.src_size) : i])
        tgt_ctx = tuple(decoded[max(0, i - policy.tgt_size) : i])
        limit = max_len if max_len is not None else 2 * len(src) + 8
        ids = _decode_sentence(model, src, src_ctx, tgt_ctx, beam_size, limit)
        decoded.append(ids)
        out.append(tok.decode(list(ids)))
    return out
