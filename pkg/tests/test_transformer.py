import numpy as np
import pytest
import torch

from ctxmt.bpe import EOS_ID, PAD_ID, SEP_ID
from ctxmt.corpus import TranslationExample
from ctxmt.errors import ConfigurationError, ScoringError
from ctxmt.model.scoring import ScoringModel
from ctxmt.model.transformer import (
    ContextTransformer,
    ToyTransformerConfig,
    TransformerScorer,
    example_tensors,
)


def tiny_scorer(seed=0, vocab=32, **overrides):
    torch.manual_seed(seed)
    kwargs = dict(
        vocab_size=vocab, layers=1, heads=2, model_dim=16, ff_dim=32,
        max_positions=64, dropout=0.0,
    )
    kwargs.update(overrides)
    cfg = ToyTransformerConfig(**kwargs)
    return TransformerScorer(ContextTransformer(cfg))


def rand_example(rng, vocab=32, with_ctx=True):
    def sent():
        return tuple(int(t) for t in rng.integers(7, vocab, rng.integers(1, 6)))

    return TranslationExample(
        src=sent(),
        tgt=sent(),
        src_context=(sent(),) if with_ctx else (),
        tgt_context=(sent(), sent()) if with_ctx else (),
    )


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ToyTransformerConfig(vocab_size=32, model_dim=30, heads=4)
    with pytest.raises(ConfigurationError):
        ToyTransformerConfig(vocab_size=4)
    with pytest.raises(ConfigurationError):
        ToyTransformerConfig(vocab_size=32, dropout=1.0)
    with pytest.raises(ConfigurationError):
        ToyTransformerConfig(vocab_size=32, layers=0)


def test_example_tensors_layout():
    ex = TranslationExample(
        src=(10, 11),
        tgt=(20, 21),
        src_context=((12,),),
        tgt_context=((22, 23),),
    )
    enc, dec_in, labels, n_scored = example_tensors(ex, 64)
    assert enc == [12, SEP_ID, 10, 11]
    assert dec_in == [1, 22, 23, SEP_ID, 20, 21]  # <bos> first
    assert labels == [22, 23, SEP_ID, 20, 21, EOS_ID]
    assert n_scored == 3  # two target tokens plus <eos>


def test_score_shape_and_finiteness():
    scorer = tiny_scorer()
    rng = np.random.default_rng(0)
    ex = rand_example(rng)
    scores = scorer.score(ex)
    assert scores.shape == (len(ex.tgt) + 1,)
    assert np.isfinite(scores).all()
    assert (scores < 0).all()  # log-probs of a softmax are negative


def test_scoring_is_deterministic():
    scorer = tiny_scorer()
    ex = rand_example(np.random.default_rng(1))
    a = scorer.score(ex)
    b = scorer.score(ex)
    assert np.array_equal(a, b)


def test_distributions_normalise_at_every_position():
    scorer = tiny_scorer()
    rng = np.random.default_rng(2)
    for _ in range(5):
        ex = rand_example(rng)
        dists = scorer.distributions(ex)
        assert dists.shape == (len(ex.tgt) + 1, scorer.vocab_size)
        mass = np.exp(dists).sum(axis=1)
        assert np.abs(mass - 1.0).max() < 1e-5


def test_distributions_agree_with_score():
    scorer = tiny_scorer()
    ex = rand_example(np.random.default_rng(3))
    dists = scorer.distributions(ex)
    picked = [dists[t, tok] for t, tok in enumerate(ex.tgt)]
    picked.append(dists[len(ex.tgt), EOS_ID])
    assert np.allclose(scorer.score(ex), picked, atol=1e-12)


def test_batch_scoring_matches_individual():
    scorer = tiny_scorer()
    rng = np.random.default_rng(4)
    examples = [rand_example(rng, with_ctx=bool(i % 2)) for i in range(9)]
    batch = scorer.score_batch(examples)
    for ex, scores in zip(examples, batch):
        assert np.allclose(scores, scorer.score(ex), atol=1e-6)


def test_causality_prefix_scores_unchanged_by_suffix():
    scorer = tiny_scorer()
    base = TranslationExample(
        src=(10, 11, 12), tgt=(20, 21, 22, 23), tgt_context=((25,),)
    )
    perturbed = TranslationExample(
        src=(10, 11, 12), tgt=(20, 21, 30, 31), tgt_context=((25,),)
    )
    a = scorer.score(base)
    b = scorer.score(perturbed)
    assert np.allclose(a[:2], b[:2], atol=1e-9)


def test_context_changes_scores():
    scorer = tiny_scorer()
    ex = TranslationExample(src=(10, 11), tgt=(12,), tgt_context=((13,),))
    other = TranslationExample(src=(10, 11), tgt=(12,), tgt_context=((14,),))
    assert scorer.score(ex)[0] != scorer.score(other)[0]


def test_out_of_vocabulary_rejected():
    scorer = tiny_scorer(vocab=16)
    with pytest.raises(ScoringError):
        scorer.score(TranslationExample(src=(16,), tgt=(7,)))
    with pytest.raises(ScoringError):
        scorer.score(TranslationExample(src=(7,), tgt=(8,), src_context=((99,),)))


def test_overlong_input_rejected_never_truncated():
    scorer = tiny_scorer(max_positions=8)
    long_src = tuple([7] * 9)
    with pytest.raises(ScoringError):
        scorer.score(TranslationExample(src=long_src, tgt=(7,)))
    long_tgt = tuple([7] * 9)
    with pytest.raises(ScoringError):
        scorer.score(TranslationExample(src=(7,), tgt=long_tgt))


def test_empty_source_is_scorable():
    scorer = tiny_scorer()
    scores = scorer.score(TranslationExample(src=(), tgt=(7, 8)))
    assert scores.shape == (3,)
    assert np.isfinite(scores).all()


def test_empty_target_scores_only_eos():
    scorer = tiny_scorer()
    scores = scorer.score(TranslationExample(src=(7, 8), tgt=()))
    assert scores.shape == (1,)


def test_satisfies_scoring_contract():
    assert isinstance(tiny_scorer(), ScoringModel)


def test_gradients_match_finite_differences():
    # double precision, dim-8 single-head toy configuration
    torch.manual_seed(0)
    cfg = ToyTransformerConfig(
        vocab_size=12, layers=1, heads=1, model_dim=8, ff_dim=8,
        max_positions=8, dropout=0.0,
    )
    module = ContextTransformer(cfg).double()
    module.eval()
    src = torch.tensor([[7, 8]])
    dec = torch.tensor([[1, 9]])
    src_pad = torch.zeros(1, 2, dtype=torch.bool)
    dec_pad = torch.zeros(1, 2, dtype=torch.bool)

    weight = module.embed.weight.detach().clone().requires_grad_(True)

    def forward_from_embedding(w):
        out = torch.func.functional_call(
            module, {"embed.weight": w}, (src, dec, src_pad, dec_pad)
        )
        return out.logsumexp(dim=-1).sum()

    assert torch.autograd.gradcheck(
        forward_from_embedding, (weight,), eps=1e-6, atol=1e-4, rtol=1e-3
    )
