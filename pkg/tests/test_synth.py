import sys

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from oracles import brute_bleu
from pivotmt.corpus import ParallelCorpus, Provenance, SentencePair
from pivotmt.errors import InsufficientSynthetic, LanguageMismatch, LexiconDomainMismatch, UnknownToken
from pivotmt.synth import (
    DictionaryTranslator,
    Grammar,
    IdentityTranslator,
    NoisyDictionaryTranslator,
    SubprocessTranslator,
    build_synthetic_source,
    build_synthetic_target,
    extend,
    generate_toy_multiway,
    load_toy_spec,
    make_toy_language,
    save_toy_spec,
    translate_all,
)


@pytest.fixture(scope="module")
def langs():
    return {
        "ko": make_toy_language("ko", 30, "가나다라마바", 1, grammar=Grammar.REVERSED),
        "en": make_toy_language("en", 30, "abcdefg", 2),
        "ar": make_toy_language("ar", 30, "ابتثجح", 3, suffixes=["ها"]),
    }


@pytest.fixture(scope="module")
def world(langs):
    mw = generate_toy_multiway([langs["ko"], langs["en"]], langs["ar"], 200, seed=9)
    return mw, mw.column("ko"), mw.column("en")


def test_lexicon_is_bijective(langs):
    for spec in langs.values():
        assert len(set(spec.lexicon.values())) == len(spec.lexicon)


@given(st.lists(st.integers(0, 29), min_size=1, max_size=10))
def test_render_parse_round_trip(seq):
    spec = make_toy_language("x", 30, "abcdef", 4, grammar=Grammar.REVERSED)
    assert spec.parse(spec.render(seq)) == seq


def test_reversed_grammar_reverses_order(langs):
    ko, en = langs["ko"], langs["en"]
    assert ko.render([0, 1]).split() == [ko.lexicon[1], ko.lexicon[0]]
    assert en.render([0, 1]).split() == [en.lexicon[0], en.lexicon[1]]


def test_parse_unknown_token(langs):
    with pytest.raises(UnknownToken):
        langs["en"].parse("zzzzzz")


def test_domain_mismatch(langs):
    small = make_toy_language("x", 10, "abc", 0)
    with pytest.raises(LexiconDomainMismatch):
        generate_toy_multiway([small], langs["ar"], 5, 0)


def test_synthetic_source_keeps_target_bytes(langs, world):
    mw, _, en_ar = world
    mt = DictionaryTranslator(langs["en"], langs["ko"])
    syn = build_synthetic_source(en_ar, mt)
    assert [p.target.encode() for p in syn] == [p.target.encode() for p in en_ar]
    assert syn.sources() == mw.column("ko").sources()
    assert all(p.provenance is Provenance.SYNTHETIC_SOURCE for p in syn)


def test_synthetic_target_with_exact_translator(langs, world):
    mw, ko_ar, _ = world
    ko_en = ParallelCorpus("ko", "en", tuple(SentencePair(r.sources[0], r.sources[1]) for r in mw))
    syn = build_synthetic_target(ko_en, DictionaryTranslator(langs["en"], langs["ar"]))
    assert (syn.sources(), syn.targets()) == (ko_ar.sources(), ko_ar.targets())
    assert all(p.provenance is Provenance.SYNTHETIC_TARGET for p in syn)


def test_language_mismatch(langs, world):
    _, ko_ar, _ = world
    with pytest.raises(LanguageMismatch):
        build_synthetic_source(ko_ar, DictionaryTranslator(langs["en"], langs["ko"]))


def test_failures_are_dropped_and_counted(langs):
    c = ParallelCorpus("en", "ar", (SentencePair(langs["en"].lexicon[0], "x"), SentencePair("???", "y")))
    syn = build_synthetic_source(c, DictionaryTranslator(langs["en"], langs["ko"]))
    assert syn.targets() == ["x"]
    assert syn.metadata == {"failures": 1, "failed_rows": [1]}


def test_noisy_translator_is_deterministic(langs, world):
    _, _, en_ar = world
    mt = NoisyDictionaryTranslator(langs["en"], langs["ar"], drop=0.3, seed=5)
    s = en_ar.sources()
    assert [mt.translate(x) for x in s] == [mt.translate(x) for x in s]
    assert translate_all(mt, s, workers=4) == translate_all(mt, s, workers=1)


def test_noise_degrades_bleu_monotonically(langs, world):
    _, _, en_ar = world
    scores = []
    for p in (0.0, 0.1, 0.3):
        mt = NoisyDictionaryTranslator(langs["en"], langs["ar"], drop=p, seed=5)
        scores.append(brute_bleu([mt.translate(s) for s in en_ar.sources()], en_ar.targets()))
    assert scores[0] == 1.0
    assert scores[0] > scores[1] > scores[2]


def test_subprocess_translator():
    mt = SubprocessTranslator([sys.executable, "-c", "import sys\nfor l in sys.stdin: print(l.strip().upper())"],
                              "en", "EN")
    assert mt.translate_batch(["ab c", "d"]) == ["AB C", "D"]


def test_identity_translator():
    assert IdentityTranslator("en", "en").translate("a b") == "a b"


def test_extend_counts_and_prefix(world):
    _, ko_ar, _ = world
    base = ParallelCorpus("ko", "ar", ko_ar.pairs[:50])
    syn = ParallelCorpus("ko", "ar", ko_ar.pairs[50:])
    ext = extend(base, syn, 120, seed=1)
    assert len(ext) == 120
    assert ext.pairs[:50] == base.pairs
    with pytest.raises(InsufficientSynthetic):
        extend(base, syn, 1000, seed=1)


def test_spec_file_round_trip(tmp_path, langs):
    save_toy_spec(langs["ko"], tmp_path / "ko.lang")
    assert load_toy_spec(tmp_path / "ko.lang") == langs["ko"]
