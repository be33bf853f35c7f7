import math

import numpy as np
import pytest

from ctxmt.corpus import TranslationExample
from ctxmt.errors import ConfigurationError, ScoringError
from ctxmt.model.enumeration import (
    EnumerationChannel,
    binary_entropy,
    channel_tokenizer,
    copy_channel,
    independent_channel,
    make_enumeration_model,
    noisy_copy_channel,
    sample_channel_corpus,
)
from ctxmt.model.scoring import ScoringModel


def ids(tok, text):
    return tuple(tok.encode(text))


def test_joint_must_be_a_distribution():
    bad = np.full((2, 2, 2), 0.2)
    with pytest.raises(ConfigurationError):
        EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), bad)
    neg = np.zeros((2, 2, 2))
    neg[0, 0, 0] = 1.5
    neg[0, 0, 1] = -0.5
    with pytest.raises(ConfigurationError):
        EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), neg)
    with pytest.raises(ConfigurationError):
        EnumerationChannel(("a",), ("u", "v"), ("a", "b"), np.full((2, 2, 2), 0.125))


def test_alphabets_must_be_single_characters():
    with pytest.raises(ConfigurationError):
        EnumerationChannel(("ab", "c"), ("u", "v"), ("a", "b"), np.full((2, 2, 2), 0.125))
    with pytest.raises(ConfigurationError):
        EnumerationChannel(("a", " "), ("u", "v"), ("a", "b"), np.full((2, 2, 2), 0.125))


def test_channel_tokenizer_covers_all_symbols():
    ch = noisy_copy_channel(0.1)
    tok = channel_tokenizer(ch)
    for sym in ("a", "b", "u", "v"):
        assert len(tok.encode(sym)) == 1
    assert tok.decode(tok.encode("uv")) == "uv"


def test_contextual_scores_are_exact():
    eps = 0.2
    ch = noisy_copy_channel(eps)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "a"), tgt_context=(ids(tok, "a"),)
    )
    scores = model.score(ex)
    assert scores.shape == (2,)
    assert scores[0] == pytest.approx(math.log(1 - eps), abs=1e-12)
    assert scores[1] == 0.0  # <eos> is certain after the full emission

    flipped = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "b"), tgt_context=(ids(tok, "a"),)
    )
    assert model.score(flipped)[0] == pytest.approx(math.log(eps), abs=1e-12)


def test_agnostic_scores_marginalise_context():
    ch = noisy_copy_channel(0.2)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(src=ids(tok, "u"), tgt=ids(tok, "a"))
    # p(y|x) = sum_c p(c) p(y|c) = 0.5 regardless of eps
    assert model.score(ex)[0] == pytest.approx(math.log(0.5), abs=1e-12)


def test_only_last_context_sentence_matters():
    ch = noisy_copy_channel(0.2)
    model = make_enumeration_model(ch)
    tok = model.tok
    one = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "a"), tgt_context=(ids(tok, "a"),)
    )
    two = TranslationExample(
        src=ids(tok, "u"),
        tgt=ids(tok, "a"),
        tgt_context=(ids(tok, "b"), ids(tok, "a")),
    )
    assert model.score(one).tolist() == model.score(two).tolist()


def test_source_context_used_when_no_target_context():
    ch = noisy_copy_channel(0.0)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "a"), src_context=(ids(tok, "a"),)
    )
    assert model.score(ex)[0] == pytest.approx(0.0, abs=1e-12)


def test_multi_symbol_sentences_score_positionwise():
    eps = 0.25
    ch = noisy_copy_channel(eps)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "uv"), tgt=ids(tok, "ab"), tgt_context=(ids(tok, "aa"),)
    )
    scores = model.score(ex)
    assert scores[0] == pytest.approx(math.log(1 - eps), abs=1e-12)
    assert scores[1] == pytest.approx(math.log(eps), abs=1e-12)


def test_zero_probability_target_rejected():
    ch = noisy_copy_channel(0.0)  # deterministic: y must equal c
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "b"), tgt_context=(ids(tok, "a"),)
    )
    with pytest.raises(ScoringError):
        model.score(ex)


def test_zero_probability_conditioning_rejected():
    # a channel whose context 'b' never co-occurs with source 'u'
    joint = np.zeros((2, 2, 2))
    joint[0, 0, 0] = 0.5  # (a, u, a)
    joint[1, 1, 1] = 0.5  # (b, v, b)
    ch = EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), joint)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "u"), tgt=ids(tok, "a"), tgt_context=(ids(tok, "b"),)
    )
    with pytest.raises(ScoringError):
        model.score(ex)


def test_length_mismatches_rejected():
    ch = noisy_copy_channel(0.1)
    model = make_enumeration_model(ch)
    tok = model.tok
    with pytest.raises(ScoringError):
        model.score(TranslationExample(src=ids(tok, "uv"), tgt=ids(tok, "a")))
    with pytest.raises(ScoringError):
        model.score(
            TranslationExample(
                src=ids(tok, "u"), tgt=ids(tok, "a"), tgt_context=(ids(tok, "aa"),)
            )
        )


def test_non_channel_symbols_rejected():
    ch = noisy_copy_channel(0.1)
    model = make_enumeration_model(ch)
    tok = model.tok
    # 'a' is a target/context symbol, not a source symbol
    with pytest.raises(ScoringError):
        model.score(TranslationExample(src=ids(tok, "a"), tgt=ids(tok, "a")))


def test_distributions_rows_normalise():
    ch = noisy_copy_channel(0.3)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "uv"), tgt=ids(tok, "ab"), tgt_context=(ids(tok, "ba"),)
    )
    dists = model.distributions(ex)
    assert dists.shape == (3, tok.vocab_size)
    mass = np.logaddexp.reduce(dists, axis=1)
    assert np.allclose(mass, 0.0, atol=1e-12)
    # final row is the certain <eos>
    assert dists[2].max() == 0.0


def test_distributions_support_partial_targets():
    ch = noisy_copy_channel(0.3)
    model = make_enumeration_model(ch)
    tok = model.tok
    ex = TranslationExample(
        src=ids(tok, "uv"), tgt=ids(tok, "a"), tgt_context=(ids(tok, "ba"),)
    )
    dists = model.distributions(ex)
    assert dists.shape == (2, tok.vocab_size)
    with pytest.raises(ScoringError):
        model.distributions(
            TranslationExample(src=ids(tok, "u"), tgt=ids(tok, "ab"))
        )


def test_satisfies_scoring_contract():
    model = make_enumeration_model(copy_channel())
    assert isinstance(model, ScoringModel)
    tok = model.tok
    exs = [
        TranslationExample(src=ids(tok, "u"), tgt=ids(tok, "a"))
        for _ in range(3)
    ]
    batch = model.score_batch(exs)
    assert len(batch) == 3
    assert all(b.tolist() == model.score(e).tolist() for b, e in zip(batch, exs))


def test_chain_sampling_validates_marginals():
    # y is biased but c is uniform, so chaining target onto context is invalid
    joint = np.zeros((2, 2, 2))
    joint[:, :, 0] = 0.2
    joint[:, :, 1] = 0.05
    ch = EnumerationChannel(("a", "b"), ("u", "v"), ("a", "b"), joint)
    with pytest.raises(ConfigurationError):
        sample_channel_corpus(ch, 2, 5, np.random.default_rng(0))


def test_chain_sampling_shapes_and_alphabet():
    ch = noisy_copy_channel(0.3)
    corpus = sample_channel_corpus(
        ch, n_docs=4, sentences_per_doc=6, rng=np.random.default_rng(0),
        symbols_per_sentence=3,
    )
    assert len(corpus) == 4
    for doc in corpus:
        assert len(doc) == 6
        for src, tgt in doc.pairs:
            assert len(src) == 3 and len(tgt) == 3
            assert set(src) <= {"u", "v"}
            assert set(tgt) <= {"a", "b"}


def test_chain_transitions_follow_the_channel():
    eps = 0.2
    ch = noisy_copy_channel(eps)
    corpus = sample_channel_corpus(
        ch, n_docs=1, sentences_per_doc=20_000, rng=np.random.default_rng(1)
    )
    doc = corpus.documents[0]
    same = sum(
        doc.pairs[i][1] == doc.pairs[i - 1][1] for i in range(1, len(doc))
    )
    rate = 1 - same / (len(doc) - 1)
    assert abs(rate - eps) < 0.01


def test_binary_entropy_endpoints():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-12)


def test_source_side_chaining():
    # context == previous source requires p(c) == p(x) and independence
    joint = np.zeros((2, 2, 2))
    # c uniform over {u, v}-indexed alphabet, x uniform, y = x xor c style
    for c in range(2):
        for x in range(2):
            y = (c + x) % 2
            joint[c, x, y] = 0.25
    ch = EnumerationChannel(("u", "v"), ("u", "v"), ("a", "b"), joint)
    corpus = sample_channel_corpus(
        ch, n_docs=2, sentences_per_doc=50, rng=np.random.default_rng(0),
        side="source",
    )
    doc = corpus.documents[0]
    for i in range(1, len(doc)):
        prev_src = doc.pairs[i - 1][0]
        src = doc.pairs[i][0]
        tgt = doc.pairs[i][1]
        c = 0 if prev_src == "u" else 1
        x = 0 if src == "u" else 1
        expected_y = "a" if (c + x) % 2 == 0 else "b"
        assert tgt == expected_y
