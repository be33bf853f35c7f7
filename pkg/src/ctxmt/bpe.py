"""Byte-pair-encoding tokenizer with a fixed block of reserved special tokens.

The vocabulary is shared between source and target text. Merges operate on
character sequences inside whitespace-delimited pieces, so decoding is exact
string concatenation and round-trips any text whose characters were seen at
training time. Characters outside the trained alphabet encode to ``<unk>``.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter

from .errors import ConfigurationError, DataError

SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<sep>", "<brk>", "<mask>", "<unk>")
PAD_ID, BOS_ID, EOS_ID, SEP_ID, BRK_ID, MASK_ID, UNK_ID = range(7)
NUM_SPECIALS = len(SPECIAL_TOKENS)

# A piece is a run of spaces glued to the following word, or a trailing run
# of spaces. Merges never cross piece boundaries.
_PIECE_RE = re.compile(r"[ ]*[^ ]+|[ ]+")


class Tokenizer:
    """Immutable BPE tokenizer. Safe to share across threads once built."""

    def __init__(self, merges: list[tuple[str, str]], alphabet: list[str]):
        self.merges = [tuple(m) for m in merges]
        self.alphabet = sorted(alphabet)
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._id_to_token: list[str] = list(SPECIAL_TOKENS) + self.alphabet
        self._token_to_id: dict[str, int] = {
            t: i for i, t in enumerate(self._id_to_token)
        }
        for a, b in self.merges:
            merged = a + b
            if merged not in self._token_to_id:
                self._token_to_id[merged] = len(self._id_to_token)
                self._id_to_token.append(merged)
        self._piece_cache: dict[str, tuple[int, ...]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self._id_to_token)

    @property
    def vocab(self) -> dict[str, int]:
        return dict(self._token_to_id)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_token):
            raise DataError(
                f"token id {token_id} out of range for vocab of {len(self._id_to_token)}"
            )
        return self._id_to_token[token_id]

    def _encode_piece(self, piece: str) -> tuple[int, ...]:
        cached = self._piece_cache.get(piece)
        if cached is not None:
            return cached
        # None marks an unknown character; it never participates in a merge.
        symbols: list[str | None] = [
            c if c in self._token_to_id else None for c in piece
        ]
        while True:
            best_rank = None
            best_pair = None
            for i in range(len(symbols) - 1):
                pair = (symbols[i], symbols[i + 1])
                rank = self._ranks.get(pair)  # type: ignore[arg-type]
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pair = rank, pair
            if best_pair is None:
                break
            merged = best_pair[0] + best_pair[1]  # type: ignore[operator]
            out: list[str | None] = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and symbols[i] == best_pair[0]
                    and symbols[i + 1] == best_pair[1]
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        ids = tuple(
            UNK_ID if s is None else self._token_to_id[s] for s in symbols
        )
        self._piece_cache[piece] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for piece in _PIECE_RE.findall(text):
            ids.extend(self._encode_piece(piece))
        return ids

    def decode(self, ids: list[int]) -> str:
        return "".join(self.token(i) for i in ids)

    def to_json_dict(self) -> dict:
        return {
            "merges": [list(m) for m in self.merges],
            "alphabet": self.alphabet,
            "specials": {t: i for i, t in enumerate(SPECIAL_TOKENS)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, ensure_ascii=True)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Tokenizer":
        try:
            with open(path, encoding="utf-8") as f:
                blob = json.load(f)
            merges = [tuple(m) for m in blob["merges"]]
            alphabet = list(blob["alphabet"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise DataError(f"cannot load tokenizer from {path}: {e}") from e
        return cls(merges, alphabet)


def train_bpe(corpus, vocab_size: int) -> Tokenizer:
    """Learn a shared-vocabulary BPE tokenizer from a parallel corpus.

    Merges are learned by descending pair frequency; ties break on the
    lexicographically smallest pair, so training is fully deterministic.
    Pairs occurring fewer than twice are never merged.
    """
    piece_freq: Counter[str] = Counter()
    for doc in corpus.documents:
        for src, tgt in doc.pairs:
            for sentence in (src, tgt):
                piece_freq.update(_PIECE_RE.findall(sentence))

    alphabet = sorted({c for piece in piece_freq for c in piece})
    if vocab_size <= NUM_SPECIALS + len(alphabet):
        raise ConfigurationError(
            f"vocab_size={vocab_size} too small: need more than "
            f"{NUM_SPECIALS} specials + {len(alphabet)} characters"
        )

    sequences: dict[str, list[str]] = {p: list(p) for p in piece_freq}
    merges: list[tuple[str, str]] = []
    tokens = set(alphabet)

    while NUM_SPECIALS + len(tokens) < vocab_size:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for piece, seq in sequences.items():
            freq = piece_freq[piece]
            for i in range(len(seq) - 1):
                pair_counts[(seq[i], seq[i + 1])] += freq
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        merged = best[0] + best[1]
        tokens.add(merged)
        for seq in sequences.values():
            i = 0
            while i < len(seq) - 1:
                if seq[i] == best[0] and seq[i + 1] == best[1]:
                    seq[i : i + 2] = [merged]
                else:
                    i += 1

    return Tokenizer(merges, alphabet)
