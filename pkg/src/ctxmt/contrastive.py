"""Contrastive evaluation: can the model rank the correct translation above
minimally different wrong ones, and does context change the ranking?

Candidates are compared by total sequence log-probability without length
normalisation. An exact score tie involving the correct candidate counts as
a failure and is reported separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .bpe import Tokenizer
from .corpus import TranslationExample
from .errors import DataError
from .model.scoring import ScoringModel


@dataclass(frozen=True)
class ContrastiveExample:
    example_id: str
    src: str
    correct: str
    contrastive: tuple[str, ...]
    src_context: tuple[str, ...] = field(default=())
    tgt_context: tuple[str, ...] = field(default=())
    phenomenon: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "contrastive", tuple(self.contrastive))
        object.__setattr__(self, "src_context", tuple(self.src_context))
        object.__setattr__(self, "tgt_context", tuple(self.tgt_context))
        if not self.contrastive:
            raise DataError(
                f"{self.example_id}: needs at least one contrastive translation"
            )
        if self.correct in self.contrastive:
            raise DataError(
                f"{self.example_id}: correct translation duplicated among "
                "the contrastive ones"
            )


def load_contrastive(path, fmt: str = "simple-json") -> tuple[ContrastiveExample, ...]:
    if fmt == "simple-json":
        return _load_simple_json(path)
    if fmt == "contrapro-json":
        return _load_contrapro(path)
    raise DataError(f"unknown contrastive format {fmt!r}")


def _load_simple_json(path) -> tuple[ContrastiveExample, ...]:
    """One example per line: {"example_id", "src", "correct",
    "contrastive": [...], optional "src_context"/"tgt_context"/"phenomenon"}."""
    out = []
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                blob = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            try:
                out.append(
                    ContrastiveExample(
                        example_id=str(blob["example_id"]),
                        src=blob["src"],
                        correct=blob["correct"],
                        contrastive=tuple(blob["contrastive"]),
                        src_context=tuple(blob.get("src_context", ())),
                        tgt_context=tuple(blob.get("tgt_context", ())),
                        phenomenon=blob.get("phenomenon", "other"),
                    )
                )
            except (KeyError, TypeError) as e:
                raise DataError(
                    f"{path}:{lineno}: missing or malformed field: {e}"
                ) from e
    if not out:
        raise DataError(f"{path}: no contrastive examples found")
    return tuple(out)


def _load_contrapro(path) -> tuple[ContrastiveExample, ...]:
    """A JSON array of records in the pronoun-testset layout: "src segment",
    "ref segment", "errors": [{"contrastive": ...}], plus optional
    "src context"/"ref context" sentence lists for context-bearing exports."""
    try:
        with open(path, encoding="utf-8") as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}") from e
    if not isinstance(records, list) or not records:
        raise DataError(f"{path}: expected a non-empty JSON array")
    out = []
    for idx, rec in enumerate(records):
        try:
            src = rec["src segment"]
            correct = rec["ref segment"]
            wrong = tuple(err["contrastive"] for err in rec["errors"])
        except (KeyError, TypeError) as e:
            raise DataError(f"{path}: record {idx}: {e}") from e
        doc = rec.get("document id", "")
        seg = rec.get("segment id", idx)
        ex_id = f"{doc}#{seg}" if doc else str(seg)
        out.append(
            ContrastiveExample(
                example_id=ex_id,
                src=src,
                correct=correct,
                contrastive=wrong,
                src_context=tuple(rec.get("src context", ())),
                tgt_context=tuple(rec.get("ref context", ())),
                phenomenon=str(rec.get("ref pronoun", "pronoun")),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class CandidateRanking:
    """Scores in candidate order (correct first, then the contrastive ones),
    the 1-based rank of the correct candidate, and whether its total score
    exactly tied another candidate's."""

    example_id: str
    scores: tuple[float, ...]
    correct_rank: int
    tie: bool

    @property
    def correct_first(self) -> bool:
        return self.correct_rank == 1 and not self.tie


CONTEXT_SIDES = ("source", "target", "both")


def _truncate(ctx: tuple[str, ...], k: Optional[int]) -> tuple[str, ...]:
    if k is None:
        return ctx
    return ctx[len(ctx) - min(k, len(ctx)) :]


def _candidate_examples(
    ex: ContrastiveExample,
    tok: Tokenizer,
    use_context: bool,
    k: Optional[int],
    side: str = "both",
) -> list[TranslationExample]:
    if side not in CONTEXT_SIDES:
        raise DataError(f"side must be one of {CONTEXT_SIDES}, got {side!r}")
    if use_context:
        src_ctx = tuple(tok.encode(s) for s in _truncate(ex.src_context, k))
        tgt_ctx = tuple(tok.encode(s) for s in _truncate(ex.tgt_context, k))
        if side == "source":
            tgt_ctx = ()
        elif side == "target":
            src_ctx = ()
    else:
        src_ctx = ()
        tgt_ctx = ()
    src = tuple(tok.encode(ex.src))
    return [
        TranslationExample(
            src=src, tgt=tuple(tok.encode(c)), src_context=src_ctx, tgt_context=tgt_ctx
        )
        for c in (ex.correct, *ex.contrastive)
    ]


def _rank_from_totals(ex_id: str, totals: list[float]) -> CandidateRanking:
    correct_total = totals[0]
    rank = 1 + sum(1 for t in totals[1:] if t > correct_total)
    tie = any(t == correct_total for t in totals[1:])
    return CandidateRanking(
        example_id=ex_id, scores=tuple(totals), correct_rank=rank, tie=tie
    )


def score_contrastive(
    model: ScoringModel,
    tok: Tokenizer,
    ex: ContrastiveExample,
    use_context: bool = True,
    k: Optional[int] = None,
    side: str = "both",
) -> CandidateRanking:
    """Rank the candidate translations by total log-probability.

    k limits how many trailing context sentences are used; None means all
    the example carries. side restricts which stream's context is fed to
    the model. use_context=False scores the context-agnostic way regardless.
    """
    cands = _candidate_examples(ex, tok, use_context, k, side)
    totals = [math.fsum(model.score(c).tolist()) for c in cands]
    return _rank_from_totals(ex.example_id, totals)


def accuracy(
    model: ScoringModel,
    tok: Tokenizer,
    examples: Sequence[ContrastiveExample],
    use_context: bool = True,
    k: Optional[int] = None,
    side: str = "both",
) -> float:
    """Fraction of examples whose correct candidate is ranked strictly first."""
    if not examples:
        raise DataError("cannot compute accuracy of an empty example set")
    wins = sum(
        score_contrastive(model, tok, ex, use_context, k, side).correct_first
        for ex in examples
    )
    return wins / len(examples)


def context_usage_indicator(
    model: ScoringModel,
    tok: Tokenizer,
    ex: ContrastiveExample,
    k: Optional[int] = None,
    side: str = "both",
) -> int:
    """1 iff context flips the example from failed to solved."""
    with_ctx = score_contrastive(model, tok, ex, use_context=True, k=k, side=side)
    without = score_contrastive(model, tok, ex, use_context=False)
    return int(with_ctx.correct_first and not without.correct_first)


@dataclass(frozen=True)
class ContrastiveEvaluation:
    """Joint outcome of the contextual and agnostic passes over a set.

    rows: (example_id, phenomenon, rank_ctx, tie_ctx, rank_agn, tie_agn,
    indicator, per_sample_cxmi of the correct candidate).
    """

    rows: tuple[tuple[str, str, int, bool, int, bool, int, float], ...]
    accuracy_contextual: float
    accuracy_agnostic: float
    n_ties_contextual: int
    n_ties_agnostic: int
    k: Optional[int]
    side: str = "both"

    def to_json_dict(self) -> dict:
        return {
            "schema": "contrastive-eval-v1",
            "k": self.k,
            "side": self.side,
            "accuracy_contextual": self.accuracy_contextual,
            "accuracy_agnostic": self.accuracy_agnostic,
            "n_ties_contextual": self.n_ties_contextual,
            "n_ties_agnostic": self.n_ties_agnostic,
            "rows": [
                {
                    "example_id": r[0],
                    "phenomenon": r[1],
                    "rank_contextual": r[2],
                    "tie_contextual": r[3],
                    "rank_agnostic": r[4],
                    "tie_agnostic": r[5],
                    "indicator": r[6],
                    "per_sample_cxmi": r[7],
                }
                for r in self.rows
            ],
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True, ensure_ascii=True)
            f.write("\n")


def evaluate_contrastive(
    model: ScoringModel,
    tok: Tokenizer,
    examples: Sequence[ContrastiveExample],
    k: Optional[int] = None,
    side: str = "both",
) -> ContrastiveEvaluation:
    """Run both passes over a set in batched model calls.

    The per-example CXMI is the score gain of the correct candidate, so the
    result carries everything needed to correlate context usage with CXMI.
    """
    if not examples:
        raise DataError("cannot evaluate an empty example set")
    ctx_exs: list[TranslationExample] = []
    agn_exs: list[TranslationExample] = []
    spans: list[tuple[int, int]] = []
    for ex in examples:
        cands_ctx = _candidate_examples(ex, tok, True, k, side)
        cands_agn = _candidate_examples(ex, tok, False, None)
        spans.append((len(ctx_exs), len(cands_ctx)))
        ctx_exs.extend(cands_ctx)
        agn_exs.extend(cands_agn)
    ctx_scores = model.score_batch(ctx_exs)
    agn_scores = model.score_batch(agn_exs)

    rows = []
    n_win_ctx = 0
    n_win_agn = 0
    n_tie_ctx = 0
    n_tie_agn = 0
    for ex, (lo, width) in zip(examples, spans):
        totals_ctx = [
            math.fsum(ctx_scores[lo + j].tolist()) for j in range(width)
        ]
        totals_agn = [
            math.fsum(agn_scores[lo + j].tolist()) for j in range(width)
        ]
        r_ctx = _rank_from_totals(ex.example_id, totals_ctx)
        r_agn = _rank_from_totals(ex.example_id, totals_agn)
        indicator = int(r_ctx.correct_first and not r_agn.correct_first)
        n_win_ctx += r_ctx.correct_first
        n_win_agn += r_agn.correct_first
        n_tie_ctx += r_ctx.tie
        n_tie_agn += r_agn.tie
        rows.append(
            (
                ex.example_id,
                ex.phenomenon,
                r_ctx.correct_rank,
                r_ctx.tie,
                r_agn.correct_rank,
                r_agn.tie,
                indicator,
                totals_ctx[0] - totals_agn[0],
            )
        )
    n = len(examples)
    return ContrastiveEvaluation(
        rows=tuple(rows),
        accuracy_contextual=n_win_ctx / n,
        accuracy_agnostic=n_win_agn / n,
        n_ties_contextual=n_tie_ctx,
        n_ties_agnostic=n_tie_agn,
        k=k,
        side=side,
    )
