"""A tiny templated bilingual world with a genuine discourse phenomenon.

Documents alternate between sentences introducing a topic and sentences
referring back to it with a pronoun. The target pronoun (er/sie) is fixed
by the grammatical class of the topic, which is only visible in the
preceding sentence unless the source happens to carry a disambiguating
hint word. That makes pronoun choice a context-dependent decision exactly
often enough to exercise the measurement pipeline end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .contrastive import ContrastiveExample
from .corpus import ParallelCorpus, ParallelDocument
from .errors import ConfigurationError

# (source noun, target noun); class fixes the target pronoun
_MASC_TOPICS = (
    ("dog", "hund"),
    ("moon", "mond"),
    ("table", "tisch"),
    ("chair", "stuhl"),
    ("tree", "baum"),
    ("bird", "vogel"),
)
_FEM_TOPICS = (
    ("cat", "katze"),
    ("sun", "sonne"),
    ("lamp", "lampe"),
    ("flower", "blume"),
    ("mouse", "maus"),
    ("duck", "ente"),
)
_ADJECTIVES = (
    ("small", "klein"),
    ("big", "gross"),
    ("old", "alt"),
    ("new", "neu"),
    ("loud", "laut"),
    ("quiet", "leise"),
)
_PRONOUN = {"m": "er", "f": "sie"}
_ARTICLE = {"m": "der", "f": "die"}
_HINT = {"m": "he", "f": "she"}


@dataclass(frozen=True)
class TopicWorldConfig:
    n_docs: int = 200
    sentences_per_doc: int = 8
    hint_fraction: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.n_docs < 1 or self.sentences_per_doc < 2:
            raise ConfigurationError(
                "need at least one document of at least two sentences"
            )
        if not 0.0 <= self.hint_fraction <= 1.0:
            raise ConfigurationError(
                f"hint_fraction={self.hint_fraction} outside [0, 1]"
            )


def _intro_pair(topic, cls) -> tuple[str, str]:
    return (
        f"look at the {topic[0]}",
        f"dort ist {_ARTICLE[cls]} {topic[1]}",
    )


def _reference_pair(cls, adj, hinted: bool) -> tuple[str, str]:
    subject = _HINT[cls] if hinted else "it"
    return (
        f"{subject} is {adj[0]}",
        f"{_PRONOUN[cls]} ist {adj[1]}",
    )


def make_topic_corpus(cfg: TopicWorldConfig) -> ParallelCorpus:
    """Sample a document corpus from the topic world.

    Every document opens with an introduction; afterwards each position is
    a fresh introduction or a pronoun reference with equal probability. A
    reference always agrees with the most recent topic, so one sentence of
    context suffices to resolve every pronoun.
    """
    rng = np.random.default_rng(cfg.seed)
    docs = []
    for d in range(cfg.n_docs):
        pairs = []
        cls: Optional[str] = None
        for i in range(cfg.sentences_per_doc):
            if cls is None or i == 0 or rng.random() < 0.5:
                cls = "m" if rng.random() < 0.5 else "f"
                pool = _MASC_TOPICS if cls == "m" else _FEM_TOPICS
                topic = pool[int(rng.integers(len(pool)))]
                pairs.append(_intro_pair(topic, cls))
            else:
                adj = _ADJECTIVES[int(rng.integers(len(_ADJECTIVES)))]
                hinted = bool(rng.random() < cfg.hint_fraction)
                pairs.append(_reference_pair(cls, adj, hinted))
        docs.append(ParallelDocument(f"doc{d:05d}", tuple(pairs)))
    return ParallelCorpus(tuple(docs))


def make_contrastive_set(
    n_pairs: int, seed: int = 0
) -> tuple[ContrastiveExample, ...]:
    """Mirrored pronoun pairs with hint-free sources.

    Each pair shares the source sentence and the candidate set; only the
    context differs, naming a masculine topic in one member and a feminine
    topic in the other. A context-blind scorer therefore gives identical
    rankings to both members and solves exactly one of them, putting its
    agnostic accuracy at exactly one half on any such set without ties.
    """
    if n_pairs < 1:
        raise ConfigurationError(f"n_pairs must be >= 1, got {n_pairs}")
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n_pairs):
        masc = _MASC_TOPICS[int(rng.integers(len(_MASC_TOPICS)))]
        fem = _FEM_TOPICS[int(rng.integers(len(_FEM_TOPICS)))]
        adj = _ADJECTIVES[int(rng.integers(len(_ADJECTIVES)))]
        src, _ = _reference_pair("m", adj, hinted=False)
        tgt_m = _reference_pair("m", adj, hinted=False)[1]
        tgt_f = _reference_pair("f", adj, hinted=False)[1]
        for cls, topic, correct, wrong, tag in (
            ("m", masc, tgt_m, tgt_f, "a"),
            ("f", fem, tgt_f, tgt_m, "b"),
        ):
            intro_src, intro_tgt = _intro_pair(topic, cls)
            out.append(
                ContrastiveExample(
                    example_id=f"pair{j:04d}{tag}",
                    src=src,
                    correct=correct,
                    contrastive=(wrong,),
                    src_context=(intro_src,),
                    tgt_context=(intro_tgt,),
                    phenomenon="pronoun",
                )
            )
    return tuple(out)


def write_contrastive_jsonl(examples, path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(
                json.dumps(
                    {
                        "example_id": ex.example_id,
                        "src": ex.src,
                        "correct": ex.correct,
                        "contrastive": list(ex.contrastive),
                        "src_context": list(ex.src_context),
                        "tgt_context": list(ex.tgt_context),
                        "phenomenon": ex.phenomenon,
                    },
                    sort_keys=True,
                    ensure_ascii=True,
                )
            )
            f.write("\n")
