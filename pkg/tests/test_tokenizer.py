import json

import pytest

from chemlm.tokenizer import (
    EOS_TOKEN,
    PAD_TOKEN,
    TokenizeError,
    Vocabulary,
    build_base_vocab,
    detokenize,
    extend_with_task_tokens,
    tokenize,
    vocab_census,
)


def toks(vocab, text):
    return [vocab.tokens[i] for i in tokenize(text, vocab).ids]


def test_census_reconciles_to_266():
    census = vocab_census()
    assert census["chemical_total"] == 266
    assert census["element_tokens"] == 236
    assert census["symbol_tokens"] == 19
    v = build_base_vocab()
    assert len(v) == census["chemical_total"] + 1  # plus padding


def test_vocab_contains_key_tokens(vocab):
    for t in ["Cl", "Br", "c", "n", "se", "@@", "%", EOS_TOKEN, PAD_TOKEN]:
        assert t in vocab


def test_ids_bijective(vocab):
    assert len(vocab.id_of) == len(vocab.tokens)
    for i, t in enumerate(vocab.tokens):
        assert vocab.id_of[t] == i


def test_chlorobenzene(vocab):
    assert toks(vocab, "Clc1ccccc1") == [
        "Cl", "c", "1", "c", "c", "c", "c", "c", "1", EOS_TOKEN,
    ]


def test_cco(vocab):
    assert toks(vocab, "CCO") == ["C", "C", "O", EOS_TOKEN]


def test_bracket_interior_segmentation(vocab):
    assert toks(vocab, "[nH]") == ["[", "n", "H", "]", EOS_TOKEN]
    assert toks(vocab, "[C@@H]") == ["[", "C", "@@", "H", "]", EOS_TOKEN]
    assert toks(vocab, "[13CH3+]") == ["[", "1", "3", "C", "H", "3", "+", "]", EOS_TOKEN]


def test_greedy_prefers_two_letter_elements(vocab):
    # Cu matches as one token; X then fails
    with pytest.raises(TokenizeError) as exc:
        tokenize("CuX", vocab)
    assert exc.value.offset == 2


def test_round_trip_identity(vocab, small_corpus):
    for s in small_corpus:
        seq = tokenize(s, vocab)
        assert detokenize(seq, vocab) == s


def test_eos_appended(vocab):
    seq = tokenize("C", vocab)
    assert seq.ids[-1] == vocab.eos_id


def test_extension_appends_stable_ids(vocab):
    before = list(vocab.tokens)
    v2 = extend_with_task_tokens(vocab, ["<logP>", "<TPSA>", "<SAS>", "<QED>", "<val>"])
    assert v2.tokens[: len(before)] == before
    assert len(v2) == len(vocab) + 5
    assert v2.special["<logP>"] == len(before)
    v3 = extend_with_task_tokens(v2, ["<C0>", "<C1>"])
    assert v3.tokens[: len(v2)] == v2.tokens


def test_extension_duplicate_rejected(vocab):
    v2 = extend_with_task_tokens(vocab, ["<logP>"])
    with pytest.raises(ValueError):
        extend_with_task_tokens(v2, ["<logP>"])
    with pytest.raises(ValueError):
        extend_with_task_tokens(vocab, ["<a>", "<a>"])


def test_task_tokens_tokenize_whole(vocab):
    v2 = extend_with_task_tokens(vocab, ["<logP>", "<val>", "<sep>"])
    assert toks(v2, "<logP>CC")[:1] == ["<logP>"]


def test_json_round_trip(vocab):
    v2 = Vocabulary.from_json(vocab.to_json())
    assert v2.tokens == vocab.tokens
    assert v2.eos_id == vocab.eos_id
    assert v2.pad_id == vocab.pad_id
    assert v2.content_hash() == vocab.content_hash()
    # hash changes when the vocabulary changes
    v3 = extend_with_task_tokens(vocab, ["<x>"])
    assert v3.content_hash() != vocab.content_hash()


def test_tokenize_error_position(vocab):
    with pytest.raises(TokenizeError) as exc:
        tokenize("CC?", vocab)
    assert exc.value.offset == 2


def test_detokenize_drops_eos_and_pad(vocab):
    seq = tokenize("CC", vocab)
    ids = seq.ids + [vocab.pad_id, vocab.pad_id]
    assert detokenize(ids, vocab) == "CC"
