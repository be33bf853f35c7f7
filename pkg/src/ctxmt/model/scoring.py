"""The scoring contract every model in this package satisfies.

A scoring model assigns teacher-forced log-probabilities (natural log) to a
target sentence given the source sentence and whatever context the example
carries. Estimators and evaluators depend only on this contract, never on a
concrete model class, so an exact enumeration model and a trained network
are interchangeable everywhere.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..corpus import TranslationExample


@runtime_checkable
class ScoringModel(Protocol):
    def score(self, example: TranslationExample) -> np.ndarray:
        """Per-position log-probs of example.tgt plus the closing <eos>.

        Returns shape (len(tgt) + 1,). Position t conditions only on
        tgt[:t], the source, and the example's context, so perturbing a
        later target token never changes an earlier component.
        """
        ...

    def score_batch(
        self, examples: Sequence[TranslationExample]
    ) -> list[np.ndarray]:
        """Scores for several examples; equals [score(e) for e in examples]."""
        ...

    def distributions(self, example: TranslationExample) -> np.ndarray:
        """Full next-token log-distributions at each scored position.

        Returns shape (len(tgt) + 1, vocab_size); each row log-sums to 0.
        The last row is the distribution after the full target, which is
        what a decoder consults when extending a partial hypothesis.
        """
        ...


def gather_scores(distributions: np.ndarray, tgt: Sequence[int], eos_id: int) -> np.ndarray:
    """Pick out the scored tokens (tgt then <eos>) from distribution rows."""
    ids = list(tgt) + [eos_id]
    return distributions[np.arange(len(ids)), ids]
