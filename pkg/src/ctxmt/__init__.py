"""Measuring and increasing context usage in document-level translation.

The pipeline: build a document corpus, train (or enumerate) a scoring
model, and quantify its context reliance with CXMI estimates, contrastive
ranking, and the correlation between the two.
"""

from .augment import AugmentConfig, build_training_stream, coword_dropout
from .bpe import (
    BOS_ID,
    BRK_ID,
    EOS_ID,
    MASK_ID,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    Tokenizer,
    train_bpe,
)
from .contrastive import (
    ContrastiveExample,
    accuracy,
    context_usage_indicator,
    evaluate_contrastive,
    load_contrastive,
    score_contrastive,
)
from .corpus import (
    ParallelCorpus,
    ParallelDocument,
    TranslationExample,
    assemble_example,
    load_corpus,
)
from .cxmi import (
    CxmiReport,
    SweepCurve,
    corpus_cxmi,
    cxmi_sweep,
    info_gain,
    per_sample_cxmi,
    per_word_cxmi,
    true_cmi,
)
from .errors import (
    ConfigurationError,
    DataError,
    NumericalError,
    ScoringError,
    ToolkitError,
)
from .stats import CorrelationResult, bleu, point_biserial

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "build_training_stream",
    "coword_dropout",
    "Tokenizer",
    "train_bpe",
    "PAD_ID",
    "BOS_ID",
    "EOS_ID",
    "SEP_ID",
    "BRK_ID",
    "MASK_ID",
    "UNK_ID",
    "ContrastiveExample",
    "accuracy",
    "context_usage_indicator",
    "evaluate_contrastive",
    "load_contrastive",
    "score_contrastive",
    "ParallelCorpus",
    "ParallelDocument",
    "TranslationExample",
    "assemble_example",
    "load_corpus",
    "CxmiReport",
    "SweepCurve",
    "corpus_cxmi",
    "cxmi_sweep",
    "info_gain",
    "per_sample_cxmi",
    "per_word_cxmi",
    "true_cmi",
    "ToolkitError",
    "ConfigurationError",
    "DataError",
    "ScoringError",
    "NumericalError",
    "CorrelationResult",
    "bleu",
    "point_biserial",
    "__version__",
]
