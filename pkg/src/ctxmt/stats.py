"""Statistics used by the evaluation pipeline: point-biserial correlation
with a Student-t significance test, and corpus BLEU.

The t-distribution tail is computed with a regularised incomplete beta
continued fraction so that the package has no runtime dependency beyond
numpy; tests cross-check it against scipy.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError

_CF_MAX_ITER = 300
_CF_EPS = 3e-16
_CF_TINY = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise DataError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if a <= 0 or b <= 0:
        raise DataError("incomplete beta needs positive shape parameters")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the continued fraction converges fast only below the distribution bulk
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_two_sided_pvalue(t: float, df: int) -> float:
    """P(|T_df| >= |t|) via I_{df/(df+t^2)}(df/2, 1/2)."""
    if df < 1:
        raise DataError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class CorrelationResult:
    r_pb: float
    t_stat: float
    p_value: float
    n: int
    n_pos: int
    n_neg: int

    def to_json_dict(self) -> dict:
        return {
            "schema": "correlation-v1",
            "r_pb": self.r_pb,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "n": self.n,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }


def point_biserial(
    values: Sequence[float], labels: Sequence[int]
) -> CorrelationResult:
    """Correlation between a continuous variable and a binary one.

    r = (mean1 - mean0) / s_n * sqrt(n1 n0 / n^2) with s_n the population
    standard deviation of all values; identical to Pearson against the 0/1
    labels. Significance is the usual two-sided t-test with n - 2 degrees
    of freedom.
    """
    vals = np.asarray(values, dtype=np.float64)
    labs = np.asarray(labels)
    if vals.ndim != 1 or vals.shape != labs.shape:
        raise DataError("values and labels must be 1-d and equal length")
    if vals.size < 3:
        raise DataError(f"need at least 3 observations, got {vals.size}")
    if not np.isfinite(vals).all():
        raise DataError("values must be finite")
    if not np.isin(labs, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    n = int(vals.size)
    n1 = int((labs == 1).sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise DataError("both label classes must be present")
    s_n = float(vals.std())  # population, not sample
    if s_n == 0.0:
        raise DataError("values have zero variance; correlation undefined")
    m1 = float(vals[labs == 1].mean())
    m0 = float(vals[labs == 0].mean())
    r = (m1 - m0) / s_n * math.sqrt(n1 * n0 / (n * n))
    df = n - 2
    if abs(r) >= 1.0:
        r = math.copysign(1.0, r)
        t = math.inf if r > 0 else -math.inf
    else:
        t = r * math.sqrt(df / (1.0 - r * r))
    return CorrelationResult(
        r_pb=r,
        t_stat=t,
        p_value=t_two_sided_pvalue(t, df),
        n=n,
        n_pos=n1,
        n_neg=n0,
    )


# words are maximal \w+ runs; every other non-space character is its own token
_BLEU_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def bleu_tokenize(text: str) -> list[str]:
    return _BLEU_TOKEN_RE.findall(text)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
    )


def bleu(
    hypotheses: Sequence[str], references: Sequence[str], max_order: int = 4
) -> float:
    """Corpus BLEU in [0, 100] against a single reference per hypothesis.

    Geometric mean of clipped n-gram precisions up to max_order times the
    brevity penalty. Orders with no hypothesis n-grams at all are dropped
    from the mean; higher-order precisions with a zero clipped count get
    add-one smoothing. A zero unigram precision short-circuits to 0.
    """
    if len(hypotheses) != len(references):
        raise DataError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise DataError("empty evaluation set")
    if max_order < 1:
        raise DataError(f"max_order must be >= 1, got {max_order}")

    clipped = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h = bleu_tokenize(hyp)
        r = bleu_tokenize(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, max_order + 1):
            h_counts = _ngrams(h, n)
            if not h_counts:
                continue
            r_counts = _ngrams(r, n)
            totals[n - 1] += sum(h_counts.values())
            clipped[n - 1] += sum(
                min(count, r_counts[gram]) for gram, count in h_counts.items()
            )

    if hyp_len == 0 or totals[0] == 0 or clipped[0] == 0:
        return 0.0
    log_precisions = [math.log(clipped[0] / totals[0])]
    for n in range(2, max_order + 1):
        total, clip = totals[n - 1], clipped[n - 1]
        if total == 0:
            continue  # no n-grams of this order anywhere; drop the order
        if clip == 0:
            log_precisions.append(math.log((clip + 1) / (total + 1)))
        else:
            log_precisions.append(math.log(clip / total))
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(math.fsum(log_precisions) / len(log_precisions))
