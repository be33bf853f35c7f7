"""Conditional cross-mutual information (CXMI) estimation.

CXMI measures how much a model's per-token code length for the target drops
when context is supplied: the Monte-Carlo estimate is the mean over samples
of log q(y | x, C) - log q(y | x), in nats, with both terms produced by the
same model. Positive values mean the model is using context.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .augment import context_sizes_for_side
from .bpe import Tokenizer
from .corpus import ParallelCorpus, TranslationExample, assemble_example
from .errors import ConfigurationError, DataError
from .model.enumeration import EnumerationChannel
from .model.scoring import ScoringModel

SIDES = ("source", "target", "both")


def info_gain(
    agnostic_logprobs: Sequence[float], contextual_logprobs: Sequence[float]
) -> float:
    """Mean of (contextual - agnostic), compensated so summation order of the
    inputs cannot move the result."""
    a = np.asarray(agnostic_logprobs, dtype=np.float64)
    b = np.asarray(contextual_logprobs, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(
            f"log-prob vectors must be 1-d and equal length, got {a.shape} vs {b.shape}"
        )
    if a.size == 0:
        raise DataError("cannot take the mean of zero samples")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise DataError("log-probs must be finite")
    return math.fsum((b - a).tolist()) / a.size


def per_word_cxmi(
    model: ScoringModel,
    contextual: TranslationExample,
    agnostic: TranslationExample,
) -> np.ndarray:
    """Per-position score gain for one sentence, <eos> slot included."""
    if contextual.src != agnostic.src or contextual.tgt != agnostic.tgt:
        raise DataError(
            "contextual and agnostic examples must share the current sentence pair"
        )
    s_ctx = model.score(contextual)
    s_agn = model.score(agnostic)
    return np.asarray(s_ctx, dtype=np.float64) - np.asarray(s_agn, dtype=np.float64)


def per_sample_cxmi(
    model: ScoringModel,
    contextual: TranslationExample,
    agnostic: TranslationExample,
) -> float:
    return math.fsum(per_word_cxmi(model, contextual, agnostic).tolist())


@dataclass(frozen=True)
class CxmiReport:
    """Corpus-level CXMI with its per-sample breakdown.

    corpus_cxmi averages per-sample values (one per sentence); the per_token
    figure divides the same total gain by the number of scored positions
    instead. std_error is the plain standard error of the per-sample mean.
    """

    corpus_cxmi: float
    std_error: float
    n_samples: int
    n_tokens: int
    corpus_cxmi_per_token: float
    side: str
    k: int
    per_sample: tuple[tuple[str, float], ...]
    per_word: Optional[tuple[tuple[str, int, int, float], ...]] = None
    bootstrap_std_error: Optional[float] = None
    warnings_: tuple[str, ...] = field(default=())

    def to_json_dict(self) -> dict:
        blob = {
            "schema": "cxmi-report-v1",
            "corpus_cxmi": self.corpus_cxmi,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "n_tokens": self.n_tokens,
            "corpus_cxmi_per_token": self.corpus_cxmi_per_token,
            "side": self.side,
            "k": self.k,
            "per_sample": [[i, v] for i, v in self.per_sample],
            "warnings": list(self.warnings_),
        }
        if self.per_word is not None:
            blob["per_word"] = [list(row) for row in self.per_word]
        if self.bootstrap_std_error is not None:
            blob["bootstrap_std_error"] = self.bootstrap_std_error
        return blob

    @classmethod
    def from_json_dict(cls, blob: dict) -> "CxmiReport":
        if blob.get("schema") != "cxmi-report-v1":
            raise DataError(f"not a cxmi report: schema={blob.get('schema')!r}")
        return cls(
            corpus_cxmi=blob["corpus_cxmi"],
            std_error=blob["std_error"],
            n_samples=blob["n_samples"],
            n_tokens=blob["n_tokens"],
            corpus_cxmi_per_token=blob["corpus_cxmi_per_token"],
            side=blob["side"],
            k=blob["k"],
            per_sample=tuple((i, v) for i, v in blob["per_sample"]),
            per_word=tuple(tuple(r) for r in blob["per_word"])
            if "per_word" in blob
            else None,
            bootstrap_std_error=blob.get("bootstrap_std_error"),
            warnings_=tuple(blob.get("warnings", ())),
        )

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, ensure_ascii=True)
            f.write("\n")

    @classmethod
    def load_json(cls, path) -> "CxmiReport":
        try:
            with open(path, encoding="utf-8") as f:
                blob = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read cxmi report {path}: {e}") from e
        return cls.from_json_dict(blob)

    def save_per_sample_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("# schema: cxmi-per-sample-v1\n")
            w = csv.writer(f)
            w.writerow(["example_id", "cxmi"])
            for ex_id, v in self.per_sample:
                w.writerow([ex_id, f"{v:.10g}"])


def _mean_and_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _check_finite(scores: np.ndarray, what: str) -> None:
    if not np.isfinite(scores).all():
        raise DataError(f"non-finite log-prob in the {what} pass")


def corpus_cxmi(
    model: ScoringModel,
    corpus: ParallelCorpus,
    tok: Tokenizer,
    side: str = "target",
    k: int = 1,
    *,
    per_word: bool = False,
    bootstrap: int = 0,
    rng: Optional[np.random.Generator] = None,
    _agnostic_scores: Optional[list[np.ndarray]] = None,
) -> CxmiReport:
    """Estimate corpus CXMI with gold context on the requested side(s).

    Every sentence contributes one sample, document-initial sentences
    included (their context window is simply empty, so they contribute 0).
    Example ids are "doc_id:i" with i the sentence's position in its
    document.
    """
    if side not in SIDES:
        raise ConfigurationError(f"side must be one of {SIDES}, got {side!r}")
    if k < 0:
        raise ConfigurationError(f"context size k must be >= 0, got {k}")
    if len(corpus) == 0 or corpus.n_sentences == 0:
        raise DataError("empty corpus")
    k_src, k_tgt = context_sizes_for_side(k, side)

    ids: list[str] = []
    contextual: list[TranslationExample] = []
    agnostic: list[TranslationExample] = []
    for doc in corpus:
        for i in range(len(doc)):
            ids.append(f"{doc.doc_id}:{i}")
            ex = assemble_example(doc, i, k_src, k_tgt, tok)
            contextual.append(ex)
            agnostic.append(ex.without_context())

    if _agnostic_scores is None:
        agn_scores = model.score_batch(agnostic)
    else:
        agn_scores = _agnostic_scores
    ctx_scores = model.score_batch(contextual)

    per_sample_rows: list[tuple[str, float]] = []
    per_word_rows: list[tuple[str, int, int, float]] = []
    diffs_flat: list[float] = []
    n_tokens = 0
    for ex_id, ex, s_ctx, s_agn in zip(ids, contextual, ctx_scores, agn_scores):
        s_ctx = np.asarray(s_ctx, dtype=np.float64)
        s_agn = np.asarray(s_agn, dtype=np.float64)
        _check_finite(s_ctx, "contextual")
        _check_finite(s_agn, "agnostic")
        diff = s_ctx - s_agn
        per_sample_rows.append((ex_id, math.fsum(diff.tolist())))
        n_tokens += diff.size
        diffs_flat.extend(diff.tolist())
        if per_word:
            scored = list(ex.tgt) + [-1]  # -1 marks the <eos> slot
            for pos, (token_id, d) in enumerate(zip(scored, diff.tolist())):
                per_word_rows.append((ex_id, pos, token_id, d))

    values = [v for _, v in per_sample_rows]
    mean, se = _mean_and_se(values)
    per_token = math.fsum(diffs_flat) / n_tokens

    boot_se = None
    if bootstrap:
        if rng is None:
            rng = np.random.default_rng(0)
        arr = np.array(values)
        means = np.empty(bootstrap)
        for b in range(bootstrap):
            means[b] = arr[rng.integers(0, arr.size, arr.size)].mean()
        boot_se = float(means.std(ddof=1))

    return CxmiReport(
        corpus_cxmi=mean,
        std_error=se,
        n_samples=len(values),
        n_tokens=n_tokens,
        corpus_cxmi_per_token=per_token,
        side=side,
        k=k,
        per_sample=tuple(per_sample_rows),
        per_word=tuple(per_word_rows) if per_word else None,
        bootstrap_std_error=boot_se,
        warnings_=tuple(_exposure_warnings(model, side, k)),
    )


def _exposure_warnings(model: ScoringModel, side: str, k: int) -> list[str]:
    """Flag evaluation settings the model never saw during training."""
    trained = getattr(model, "trained_context", None)
    if not trained:
        return []
    out = []
    if k > trained.get("k_max", k):
        out.append(
            f"evaluating with k={k} but the model was trained with "
            f"k_max={trained['k_max']}"
        )
    t_side = trained.get("side")
    if k > 0 and t_side is not None and t_side != side and t_side != "both":
        out.append(
            f"evaluating {side}-side context but the model was trained on "
            f"{t_side}-side context"
        )
    for msg in out:
        warnings.warn(msg, stacklevel=3)
    return out


@dataclass(frozen=True)
class SweepCurve:
    """CXMI as a function of context size at a fixed side."""

    side: str
    points: tuple[tuple[int, float, float], ...]  # (k, cxmi, std_error)
    warnings_: tuple[str, ...] = field(default=())

    def to_json_dict(self) -> dict:
        return {
            "schema": "cxmi-sweep-v1",
            "side": self.side,
            "points": [
                {"k": k, "cxmi": v, "std_error": se} for k, v, se in self.points
            ],
            "warnings": list(self.warnings_),
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, ensure_ascii=True)
            f.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("# schema: cxmi-sweep-v1\n")
            w = csv.writer(f)
            w.writerow(["k", "cxmi", "std_error"])
            for k, v, se in self.points:
                w.writerow([k, f"{v:.10g}", f"{se:.10g}"])


def cxmi_sweep(
    model: ScoringModel,
    corpus: ParallelCorpus,
    tok: Tokenizer,
    side: str = "target",
    k_max: int = 4,
) -> SweepCurve:
    """Corpus CXMI at every k in 0..k_max, sharing one agnostic pass.

    The k = 0 point is exactly 0: both passes would score the identical
    example, so no model call is spent on it.
    """
    if k_max < 0:
        raise ConfigurationError(f"k_max must be >= 0, got {k_max}")
    if side not in SIDES:
        raise ConfigurationError(f"side must be one of {SIDES}, got {side!r}")
    if len(corpus) == 0 or corpus.n_sentences == 0:
        raise DataError("empty corpus")

    agnostic = [
        assemble_example(doc, i, 0, 0, tok)
        for doc in corpus
        for i in range(len(doc))
    ]
    agn_scores = model.score_batch(agnostic)

    points: list[tuple[int, float, float]] = [(0, 0.0, 0.0)]
    all_warnings: list[str] = []
    for k in range(1, k_max + 1):
        report = corpus_cxmi(
            model, corpus, tok, side, k, _agnostic_scores=agn_scores
        )
        points.append((k, report.corpus_cxmi, report.std_error))
        for w in report.warnings_:
            if w not in all_warnings:
                all_warnings.append(w)
    return SweepCurve(side=side, points=tuple(points), warnings_=tuple(all_warnings))


def true_cmi(channel: EnumerationChannel) -> float:
    """Exact I(C; Y | X) of an enumeration channel, in nats per symbol."""
    joint = channel.joint
    p_cx = joint.sum(axis=2, keepdims=True)
    p_xy = joint.sum(axis=0, keepdims=True)
    p_x = joint.sum(axis=(0, 2), keepdims=True)
    terms = []
    it = np.nditer(joint, flags=["multi_index"])
    for p in it:
        p = float(p)
        if p == 0.0:
            continue
        c, x, y = it.multi_index
        cond_ctx = p / float(p_cx[c, x, 0])
        cond_agn = float(p_xy[0, x, y]) / float(p_x[0, x, 0])
        terms.append(p * (math.log(cond_ctx) - math.log(cond_agn)))
    return math.fsum(terms)
