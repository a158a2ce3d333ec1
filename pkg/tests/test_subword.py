from pathlib import Path

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from oracles import naive_bpe, naive_encode
from pivotmt.errors import EmptyCorpus, TargetTooSmall
from pivotmt.subword import (
    EOW,
    BpeModel,
    coverage,
    decode,
    decode_line,
    encode,
    encode_line,
    load_bpe,
    save_bpe,
    train_bpe,
)

DATA = Path(__file__).parent / "data"
GOLDEN_TEXT = ["low low low low low", "lower lower", "newest newest newest newest newest newest",
               "widest widest widest"]

alpha_word = st.text(alphabet="abcde", min_size=1, max_size=7)
alpha_sentence = st.lists(alpha_word, min_size=1, max_size=6).map(" ".join)


def test_marker_is_a_separate_symbol():
    m = train_bpe(["low low low"], 6)
    assert m.merges == (("l", "o"), ("lo", "w"))
    assert encode(m, "low") == ["low", EOW]
    assert encode(train_bpe(["low low low"], 10), "low") == ["low" + EOW]


def test_golden_merges():
    m = train_bpe(GOLDEN_TEXT, 20)
    expected = [tuple(line.split(" ")) for line in (DATA / "golden.merges").read_text(encoding="utf-8").splitlines()]
    assert list(m.merges) == expected


def test_tie_break_is_lexicographic():
    # ("a","b") and ("c","d") both occur twice; ("a","b") sorts first
    m = train_bpe(["cd ab cd ab"], 6)
    assert m.merges[0] == ("a", "b")


def test_stops_when_no_pair_repeats():
    m = train_bpe(["abc"], 100)
    assert m.merges == ()


def test_errors():
    with pytest.raises(EmptyCorpus):
        train_bpe(["  ", ""], 10)
    with pytest.raises(TargetTooSmall):
        train_bpe(["abc"], 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(alpha_sentence, min_size=1, max_size=12), st.integers(7, 40))
def test_matches_naive_oracle(corpus, size):
    m = train_bpe(corpus, size)
    assert list(m.merges) == naive_bpe(corpus, size)
    for w in {w for s in corpus for w in s.split()}:
        assert list(m.encode_word(w)) == naive_encode(w, m.merges)


@settings(max_examples=100, deadline=None)
@given(st.lists(alpha_sentence, min_size=1, max_size=10), alpha_sentence)
def test_decode_inverts_encode(corpus, s):
    m = train_bpe(corpus, 30)
    assert decode(encode(m, s)) == " ".join(s.split())
    assert decode_line(encode_line(m, s)) == " ".join(s.split())


def test_unseen_characters_pass_through():
    m = train_bpe(["abab abab"], 8)
    assert decode(encode(m, "abz")) == "abz"
    assert "z" in encode(m, "abz")


def test_coverage_one_novel_word_in_200():
    m = train_bpe(["ab ba aab"], 10)
    sents = ["ab"] * 199 + ["abq"]
    assert coverage(m, sents).coverage == 0.995


def test_coverage_with_vocab_limit():
    m = train_bpe(["ab ab ab"], 10)
    # limit to the alphabet plus marker: merged symbols fall outside
    assert coverage(m, ["ab"], vocab_limit=3).coverage == 0.0
    assert coverage(m, ["ab"]).coverage == 1.0
    assert coverage(m, []).coverage == 1.0


def test_save_load_round_trip(tmp_path):
    m = train_bpe(GOLDEN_TEXT, 20)
    save_bpe(m, tmp_path / "m.bpe")
    m2 = load_bpe(tmp_path / "m.bpe")
    assert m2 == m
    assert all(m2.encode_word(w) == m.encode_word(w) for w in ("lowest", "newer", "xyz"))


def test_load_file_without_alphabet_line(tmp_path):
    p = tmp_path / "m.bpe"
    p.write_text(f"{EOW}\nl o\nlo w\n", encoding="utf-8")
    m = load_bpe(p)
    assert m.merges == (("l", "o"), ("lo", "w"))
    assert encode(m, "low") == ["low", EOW]


def test_ordered_vocab_layout():
    m = BpeModel(merges=(("a", "b"),), alphabet=("a", "b"))
    assert m.ordered_vocab == ("a", "b", EOW, "ab")
