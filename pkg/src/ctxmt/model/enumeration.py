"""Exact discrete channel models for validating the estimators.

An enumeration channel is an explicit joint distribution p(c, x, y) over
single-character symbols. Sentences are strings of such symbols, one channel
draw per position, independent across positions. Conditionals are computed
by direct marginalisation, so scores are exact up to float rounding and the
conditional mutual information has a closed form the estimators can be
checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..bpe import EOS_ID, Tokenizer
from ..corpus import ParallelCorpus, ParallelDocument, TranslationExample
from ..errors import ConfigurationError, ScoringError

_ATOL = 1e-9


@dataclass(frozen=True)
class EnumerationChannel:
    """Joint distribution over (context, source, target) symbols.

    joint[i, j, k] = p(c = context_alphabet[i], x = source_alphabet[j],
    y = target_alphabet[k]). Symbols must be single characters so that a
    tokenizer round-trips them one id per symbol.
    """

    context_alphabet: tuple[str, ...]
    source_alphabet: tuple[str, ...]
    target_alphabet: tuple[str, ...]
    joint: np.ndarray

    def __post_init__(self):
        joint = np.asarray(self.joint, dtype=np.float64)
        object.__setattr__(self, "joint", joint)
        for name, alpha in (
            ("context", self.context_alphabet),
            ("source", self.source_alphabet),
            ("target", self.target_alphabet),
        ):
            if len(set(alpha)) != len(alpha):
                raise ConfigurationError(f"duplicate symbols in {name} alphabet")
            if any(len(s) != 1 or s.isspace() for s in alpha):
                raise ConfigurationError(
                    f"{name} alphabet must hold single non-space characters"
                )
        expected = (
            len(self.context_alphabet),
            len(self.source_alphabet),
            len(self.target_alphabet),
        )
        if joint.shape != expected:
            raise ConfigurationError(
                f"joint shape {joint.shape} does not match alphabets {expected}"
            )
        if np.any(joint < 0):
            raise ConfigurationError("joint distribution has negative entries")
        if abs(float(joint.sum()) - 1.0) > _ATOL:
            raise ConfigurationError(
                f"joint distribution sums to {float(joint.sum())!r}, not 1"
            )

    @property
    def p_context(self) -> np.ndarray:
        return self.joint.sum(axis=(1, 2))

    @property
    def p_source(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 2))

    @property
    def p_target(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 1))

    def log_cond_contextual(self) -> np.ndarray:
        """log p(y | x, c); -inf where p(y|x,c) = 0, nan where p(x,c) = 0."""
        p_cx = self.joint.sum(axis=2, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = self.joint / p_cx
            out = np.log(cond)
        out[np.broadcast_to(p_cx == 0, out.shape)] = np.nan
        return out

    def log_cond_agnostic(self) -> np.ndarray:
        """log p(y | x); -inf where zero, nan where p(x) = 0."""
        p_xy = self.joint.sum(axis=0)
        p_x = p_xy.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(p_xy / p_x)
        out[np.broadcast_to(p_x == 0, out.shape)] = np.nan
        return out


def channel_tokenizer(channel: EnumerationChannel) -> Tokenizer:
    """Merge-free tokenizer whose alphabet is the union of channel symbols."""
    symbols = sorted(
        set(channel.context_alphabet)
        | set(channel.source_alphabet)
        | set(channel.target_alphabet)
    )
    return Tokenizer(merges=[], alphabet=symbols)


class EnumerationScorer:
    """ScoringModel backed by exact channel conditionals.

    Sentences are scored positionwise. The channel is first-order: only the
    most recent context sentence matters, extra context sentences are
    conditionally irrelevant by construction and are ignored. Target context
    is preferred over source context when both are present.
    """

    def __init__(self, channel: EnumerationChannel, tok: Optional[Tokenizer] = None):
        self.channel = channel
        self.tok = tok if tok is not None else channel_tokenizer(channel)
        self.vocab_size = self.tok.vocab_size

        def index_map(alphabet):
            out = {}
            for pos, sym in enumerate(alphabet):
                ids = self.tok.encode(sym)
                if len(ids) != 1:
                    raise ConfigurationError(
                        f"symbol {sym!r} does not encode to a single token"
                    )
                out[ids[0]] = pos
            return out

        self._ctx_idx = index_map(channel.context_alphabet)
        self._src_idx = index_map(channel.source_alphabet)
        self._tgt_idx = index_map(channel.target_alphabet)
        self._tgt_token_ids = np.array(
            [self.tok.encode(s)[0] for s in channel.target_alphabet], dtype=np.int64
        )
        self._log_ctx = channel.log_cond_contextual()
        self._log_agn = channel.log_cond_agnostic()

    def _symbol_indices(self, ids: Sequence[int], table, what: str) -> list[int]:
        out = []
        for t in ids:
            if t not in table:
                raise ScoringError(
                    f"token id {t} is not a {what} symbol of this channel"
                )
            out.append(table[t])
        return out

    def _context_indices(self, example: TranslationExample, length: int):
        if example.tgt_context:
            sent, table, side = example.tgt_context[-1], self._ctx_idx, "context"
        elif example.src_context:
            sent, table, side = example.src_context[-1], self._ctx_idx, "context"
        else:
            return None
        if len(sent) != length:
            raise ScoringError(
                f"context sentence has {len(sent)} symbols, current has {length}"
            )
        return self._symbol_indices(sent, table, side)

    def _position_rows(self, example: TranslationExample) -> list[np.ndarray]:
        """Log-distribution over target symbols for each source position."""
        xs = self._symbol_indices(example.src, self._src_idx, "source")
        cs = self._context_indices(example, len(xs))
        rows = []
        for t, x in enumerate(xs):
            if cs is None:
                row = self._log_agn[x]
            else:
                row = self._log_ctx[cs[t], x]
            if np.isnan(row).any():
                raise ScoringError(
                    "conditioning on a zero-probability (context, source) event"
                )
            rows.append(row)
        return rows

    def score(self, example: TranslationExample) -> np.ndarray:
        if len(example.tgt) != len(example.src):
            raise ScoringError(
                f"channel emits exactly {len(example.src)} symbols, target has "
                f"{len(example.tgt)}; the mismatch is a zero-probability event"
            )
        rows = self._position_rows(example)
        ys = self._symbol_indices(example.tgt, self._tgt_idx, "target")
        out = np.empty(len(ys) + 1, dtype=np.float64)
        for t, (row, y) in enumerate(zip(rows, ys)):
            lp = row[y]
            if lp == -np.inf:
                raise ScoringError(
                    f"target symbol at position {t} has probability zero"
                )
            out[t] = lp
        out[-1] = 0.0  # the channel stops after len(src) symbols with certainty
        return out

    def score_batch(
        self, examples: Sequence[TranslationExample]
    ) -> list[np.ndarray]:
        return [self.score(e) for e in examples]

    def distributions(self, example: TranslationExample) -> np.ndarray:
        T = len(example.tgt)
        if T > len(example.src):
            raise ScoringError(
                f"target longer than the {len(example.src)}-symbol emission"
            )
        rows = self._position_rows(example)
        out = np.full((T + 1, self.vocab_size), -np.inf, dtype=np.float64)
        for t in range(T + 1):
            if t < len(example.src):
                out[t, self._tgt_token_ids] = rows[t]
            else:
                out[t, EOS_ID] = 0.0
        return out


def make_enumeration_model(
    channel: EnumerationChannel, tok: Optional[Tokenizer] = None
) -> EnumerationScorer:
    return EnumerationScorer(channel, tok)


# --- stock channels used throughout the tests ---


def copy_channel() -> EnumerationChannel:
    """y = x exactly; the context is independent noise. CMI(C;Y|X) = 0."""
    joint = np.zeros((2, 2, 2))
    for c in range(2):
        for x in range(2):
            joint[c, x, x] = 0.25
    return EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), joint)


def noisy_copy_channel(eps: float = 0.0) -> EnumerationChannel:
    """y = c flipped with probability eps; x is independent uniform noise.

    CMI(C;Y|X) = log 2 - H(eps) nats, so eps = 0 gives exactly log 2.
    """
    if not 0.0 <= eps <= 1.0:
        raise ConfigurationError(f"flip probability {eps} outside [0, 1]")
    joint = np.zeros((2, 2, 2))
    for c in range(2):
        for x in range(2):
            for y in range(2):
                p_y = 1.0 - eps if y == c else eps
                joint[c, x, y] = 0.25 * p_y
    return EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), joint)


def independent_channel() -> EnumerationChannel:
    """c, x, y all independent and uniform. CMI(C;Y|X) = 0."""
    joint = np.full((2, 2, 2), 0.125)
    return EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), joint)


def _validate_chain_marginals(channel: EnumerationChannel, side: str) -> None:
    if side == "target":
        if channel.context_alphabet != channel.target_alphabet:
            raise ConfigurationError(
                "target-side chaining needs context and target alphabets equal"
            )
        if np.abs(channel.p_context - channel.p_target).max() > _ATOL:
            raise ConfigurationError(
                "target-side chaining needs p(c) == p(y); this channel violates it"
            )
    elif side == "source":
        if channel.context_alphabet != channel.source_alphabet:
            raise ConfigurationError(
                "source-side chaining needs context and source alphabets equal"
            )
        if np.abs(channel.p_context - channel.p_source).max() > _ATOL:
            raise ConfigurationError(
                "source-side chaining needs p(c) == p(x); this channel violates it"
            )
        p_cx = channel.joint.sum(axis=2)
        indep = np.outer(channel.p_context, channel.p_source)
        if np.abs(p_cx - indep).max() > _ATOL:
            raise ConfigurationError(
                "source-side chaining needs c independent of x in the channel"
            )
    else:
        raise ConfigurationError(f"chain side must be source or target, got {side!r}")


def sample_channel_corpus(
    channel: EnumerationChannel,
    n_docs: int,
    sentences_per_doc: int,
    rng: np.random.Generator,
    side: str = "target",
    symbols_per_sentence: int = 1,
) -> ParallelCorpus:
    """Draw a document corpus whose context structure matches the channel.

    Sentences are chained so that the channel's context for sentence i is
    sentence i-1 on the chosen side: the first pair of each document is
    drawn from the (x, y) marginal, and every later pair from p(x, y | c)
    with c read off the previous sentence positionwise. This requires the
    chained side's marginal to equal the context marginal, which is checked
    up front. Document-initial sentences are genuinely context-free.
    """
    if n_docs < 1 or sentences_per_doc < 1 or symbols_per_sentence < 1:
        raise ConfigurationError("corpus dimensions must be positive")
    _validate_chain_marginals(channel, side)

    n_c = len(channel.context_alphabet)
    n_x = len(channel.source_alphabet)
    n_y = len(channel.target_alphabet)
    p_xy = channel.joint.sum(axis=0).reshape(-1)
    cum_xy = np.cumsum(p_xy)
    p_c = channel.p_context
    cond = np.zeros((n_c, n_x * n_y))
    for c in range(n_c):
        if p_c[c] > 0:
            cond[c] = channel.joint[c].reshape(-1) / p_c[c]
    cum_cond = np.cumsum(cond, axis=1)

    m = symbols_per_sentence
    src_syms = channel.source_alphabet
    tgt_syms = channel.target_alphabet
    ctx_pos = {s: i for i, s in enumerate(channel.context_alphabet)}

    documents = []
    for d in range(n_docs):
        u = rng.random((sentences_per_doc, m))
        pairs = []
        prev: Optional[str] = None
        for i in range(sentences_per_doc):
            src_chars = []
            tgt_chars = []
            for j in range(m):
                if prev is None:
                    flat = int(np.searchsorted(cum_xy, u[i, j], side="right"))
                else:
                    c = ctx_pos[prev[j]]
                    flat = int(np.searchsorted(cum_cond[c], u[i, j], side="right"))
                flat = min(flat, n_x * n_y - 1)
                src_chars.append(src_syms[flat // n_y])
                tgt_chars.append(tgt_syms[flat % n_y])
            src = "".join(src_chars)
            tgt = "".join(tgt_chars)
            pairs.append((src, tgt))
            prev = src if side == "source" else tgt
        documents.append(ParallelDocument(f"doc{d:05d}", tuple(pairs)))
    return ParallelCorpus(tuple(documents))


def binary_entropy(eps: float) -> float:
    """H(eps) in nats, with the 0 log 0 = 0 convention."""
    if eps in (0.0, 1.0):
        return 0.0
    return -(eps * math.log(eps) + (1.0 - eps) * math.log(1.0 - eps))
