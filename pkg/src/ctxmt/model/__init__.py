from .scoring import ScoringModel
from .enumeration import (
    EnumerationChannel,
    EnumerationScorer,
    channel_tokenizer,
    copy_channel,
    independent_channel,
    make_enumeration_model,
    noisy_copy_channel,
    sample_channel_corpus,
)
from .transformer import ContextTransformer, ToyTransformerConfig, TransformerScorer
from .training import (
    TrainConfig,
    load_checkpoint,
    lr_schedule,
    save_checkpoint,
    train,
)
from .decoding import ContextPolicy, decode_document

__all__ = [
    "ScoringModel",
    "EnumerationChannel",
    "EnumerationScorer",
    "channel_tokenizer",
    "copy_channel",
    "independent_channel",
    "make_enumeration_model",
    "noisy_copy_channel",
    "sample_channel_corpus",
    "ContextTransformer",
    "ToyTransformerConfig",
    "TransformerScorer",
    "TrainConfig",
    "load_checkpoint",
    "lr_schedule",
    "save_checkpoint",
    "train",
    "ContextPolicy",
    "decode_document",
]
