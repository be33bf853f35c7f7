import json

import pytest
from hypothesis import given, strategies as st

from ctxmt.bpe import (
    BOS_ID,
    BRK_ID,
    EOS_ID,
    MASK_ID,
    NUM_SPECIALS,
    PAD_ID,
    SEP_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    Tokenizer,
    train_bpe,
)
from ctxmt.corpus import ParallelCorpus, ParallelDocument
from ctxmt.errors import ConfigurationError, DataError


def corpus_of(*sentences):
    pairs = tuple((s, s) for s in sentences)
    return ParallelCorpus((ParallelDocument("d0", pairs),))


def test_special_ids_are_fixed():
    assert (PAD_ID, BOS_ID, EOS_ID, SEP_ID, BRK_ID, MASK_ID, UNK_ID) == tuple(range(7))
    tok = train_bpe(corpus_of("ab ab"), 16)
    for i, name in enumerate(SPECIAL_TOKENS):
        assert tok.token(i) == name


def test_round_trip_exact():
    tok = train_bpe(corpus_of("the cat sat on the mat", "a cat"), 64)
    for text in ["the cat sat", "cat cat cat", "  the   mat ", "a", ""]:
        assert tok.decode(tok.encode(text)) == text


def test_most_frequent_pair_merges_first():
    tok = train_bpe(corpus_of("ab ab ab"), 16)
    assert tok.merges[0] == ("a", "b")


def test_ties_break_lexicographically():
    # pairs ('a','b'), (' ','c'), ('c','d') all occur twice; space sorts first
    tok = train_bpe(corpus_of("ab cd", "ab cd"), 32)
    assert tok.merges[0] == (" ", "c")


def test_unknown_characters_map_to_unk():
    tok = train_bpe(corpus_of("ab ab"), 16)
    ids = tok.encode("aXb")
    assert ids[1] == UNK_ID
    assert tok.decode([ids[1]]) == "<unk>"


def test_vocab_size_too_small_rejected():
    with pytest.raises(ConfigurationError):
        train_bpe(corpus_of("abcdef"), NUM_SPECIALS + 3)


def test_decode_out_of_range_rejected():
    tok = train_bpe(corpus_of("ab"), 16)
    with pytest.raises(DataError):
        tok.decode([tok.vocab_size])
    with pytest.raises(DataError):
        tok.decode([-1])


def test_save_load_round_trip(tmp_path):
    tok = train_bpe(corpus_of("the cat sat on the mat"), 48)
    path = tmp_path / "tok.json"
    tok.save(path)
    loaded = Tokenizer.load(path)
    assert loaded.encode("the cat") == tok.encode("the cat")
    assert loaded.sha256 == tok.sha256


def test_training_is_deterministic():
    a = train_bpe(corpus_of("she sells sea shells", "by the sea shore"), 64)
    b = train_bpe(corpus_of("she sells sea shells", "by the sea shore"), 64)
    assert a.to_json() == b.to_json()
    assert a.sha256 == b.sha256


def test_saved_file_is_valid_json(tmp_path):
    tok = train_bpe(corpus_of("ab ab"), 16)
    path = tmp_path / "tok.json"
    tok.save(path)
    blob = json.loads(path.read_text())
    assert set(blob) == {"merges", "alphabet", "specials"}
    assert blob["specials"]["<pad>"] == 0


def test_corrupt_tokenizer_file_rejected(tmp_path):
    path = tmp_path / "tok.json"
    path.write_text("{not json")
    with pytest.raises(DataError):
        Tokenizer.load(path)


@given(st.text(alphabet="abc d", max_size=40))
def test_round_trip_property(text):
    tok = train_bpe(corpus_of("abc abc cab", "d ad bd"), 32)
    assert tok.decode(tok.encode(text)) == text


def test_encoding_never_emits_specials_for_plain_text():
    tok = train_bpe(corpus_of("hello world"), 40)
    ids = tok.encode("hello world")
    assert all(i >= NUM_SPECIALS for i in ids)
