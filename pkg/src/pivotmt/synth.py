"""Pivot-based corpus extension and the toy languages used to exercise it.

A synthetic-target corpus keeps the original source column and machine
translates the pivot into the target language; a synthetic-source corpus
keeps the original target and translates the pivot into the source
language. Any object with ``src_lang``, ``tgt_lang`` and ``translate`` can
serve as the translator.
"""
from __future__ import annotations

import enum
import hashlib
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .corpus import (
    MultiWayCorpus,
    MultiWayRow,
    ParallelCorpus,
    Provenance,
    SentencePair,
    atomic_write_text,
    check_sentence,
    truncate,
)
from .errors import (
    ConfigParse,
    DataError,
    InsufficientSynthetic,
    LanguageMismatch,
    LexiconDomainMismatch,
    TranslatorFailure,
    UnknownToken,
)


class Translator(Protocol):
    src_lang: str
    tgt_lang: str
    concurrent_safe: bool

    def translate(self, sentence: str) -> str: ...


@dataclass(frozen=True)
class IdentityTranslator:
    src_lang: str
    tgt_lang: str
    concurrent_safe: bool = True

    def translate(self, sentence: str) -> str:
        return sentence


# -- toy languages -----------------------------------------------------------

class Grammar(enum.Enum):
    IDENTITY = "identity"
    REVERSED = "reversed"


@dataclass(frozen=True)
class ToyLanguageSpec:
    lang_code: str
    lexicon: Mapping[int, str]
    sentence_length_range: tuple[int, int] = (3, 8)
    grammar: Grammar = Grammar.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "lexicon", dict(self.lexicon))
        tokens = list(self.lexicon.values())
        if len(set(tokens)) != len(tokens):
            raise DataError(f"{self.lang_code}: lexicon is not bijective")
        for tok in tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError(f"{self.lang_code}: lexicon token {tok!r} is empty or has whitespace")
        lo, hi = self.sentence_length_range
        if not 1 <= lo <= hi:
            raise DataError(f"{self.lang_code}: bad length range {self.sentence_length_range}")
        object.__setattr__(self, "_inverse", {t: c for c, t in self.lexicon.items()})

    @property
    def concepts(self) -> frozenset[int]:
        return frozenset(self.lexicon)

    def render(self, concepts: Sequence[int]) -> str:
        toks = [self.lexicon[c] for c in concepts]
        if self.grammar is Grammar.REVERSED:
            toks.reverse()
        return " ".join(toks)

    def parse(self, sentence: str) -> list[int]:
        """Inverse of ``render``: concept ids in canonical order."""
        inv = self._inverse
        out = []
        for tok in sentence.split():
            if tok not in inv:
                raise UnknownToken(tok)
            out.append(inv[tok])
        if self.grammar is Grammar.REVERSED:
            out.reverse()
        return out


def make_toy_language(
    lang_code: str,
    n_concepts: int,
    alphabet: str,
    seed: int,
    grammar: Grammar = Grammar.IDENTITY,
    length_range: tuple[int, int] = (3, 8),
    stem_len: tuple[int, int] = (2, 4),
    suffixes: Sequence[str] = (),
    suffix_rate: float = 0.4,
) -> ToyLanguageSpec:
    """Random lexicon over ``alphabet``; some words get a suffix when given."""
    rng = np.random.default_rng(seed)
    chars = list(alphabet)
    lexicon = {}
    used = set()
    while len(lexicon) < n_concepts:
        n = int(rng.integers(stem_len[0], stem_len[1] + 1))
        word = "".join(chars[i] for i in rng.integers(0, len(chars), size=n))
        if suffixes and rng.random() < suffix_rate:
            word += suffixes[int(rng.integers(0, len(suffixes)))]
        if word in used:
            continue
        used.add(word)
        lexicon[len(lexicon)] = word
    return ToyLanguageSpec(lang_code, lexicon, tuple(length_range), grammar)


def sample_concept_sequences(pool: Sequence[int], n_rows: int, length_range, seed: int) -> list[list[int]]:
    rng = np.random.default_rng(seed)
    pool = np.asarray(sorted(pool))
    lo, hi = length_range
    out = []
    for _ in range(n_rows):
        n = int(rng.integers(lo, hi + 1))
        out.append([int(c) for c in rng.choice(pool, size=n)])
    return out


def _check_domain(specs: Sequence[ToyLanguageSpec]) -> frozenset[int]:
    domain = specs[0].concepts
    for s in specs[1:]:
        if s.concepts != domain:
            raise LexiconDomainMismatch(f"{s.lang_code} and {specs[0].lang_code} cover different concepts")
    return domain


def generate_toy_multiway(
    specs: Sequence[ToyLanguageSpec],
    tgt_spec: ToyLanguageSpec,
    n_rows: int,
    seed: int,
    *,
    concepts: Optional[Sequence[int]] = None,
    length_range: Optional[tuple[int, int]] = None,
) -> MultiWayCorpus:
    """Fully aligned N-way corpus rendered from sampled concept sequences.

    ``concepts`` and ``length_range`` restrict sampling to a sub-domain;
    by default the whole shared lexicon and the target's length range are used.
    """
    if n_rows < 1:
        raise DataError("n_rows must be >= 1")
    domain = _check_domain(list(specs) + [tgt_spec])
    pool = sorted(concepts) if concepts is not None else sorted(domain)
    if not set(pool) <= domain:
        raise LexiconDomainMismatch("concept pool is outside the shared lexicon domain")
    seqs = sample_concept_sequences(pool, n_rows, length_range or tgt_spec.sentence_length_range, seed)
    rows = tuple(
        MultiWayRow(tuple(s.render(seq) for s in specs), tgt_spec.render(seq)) for seq in seqs
    )
    return MultiWayCorpus(tuple(s.lang_code for s in specs), tgt_spec.lang_code, rows)


@dataclass(frozen=True)
class DictionaryTranslator:
    """Exact token-wise translation through shared concept ids."""

    source: ToyLanguageSpec
    target: ToyLanguageSpec
    concurrent_safe: bool = True

    def __post_init__(self):
        _check_domain([self.source, self.target])

    @property
    def src_lang(self):
        return self.source.lang_code

    @property
    def tgt_lang(self):
        return self.target.lang_code

    def translate(self, sentence: str) -> str:
        return self.target.render(self.source.parse(sentence))

    def inverse(self) -> "DictionaryTranslator":
        return DictionaryTranslator(self.target, self.source)


@dataclass(frozen=True)
class NoisyDictionaryTranslator:
    """Dictionary translation with seeded token dropout and substitution.

    The noise for a sentence is drawn from an RNG keyed on (seed, sentence),
    so the same input always yields the same output.
    """

    source: ToyLanguageSpec
    target: ToyLanguageSpec
    drop: float = 0.0
    substitute: float = 0.0
    seed: int = 0
    concurrent_safe: bool = True

    def __post_init__(self):
        _check_domain([self.source, self.target])
        if not (0 <= self.drop <= 1 and 0 <= self.substitute <= 1):
            raise DataError("noise probabilities must lie in [0, 1]")

    @property
    def src_lang(self):
        return self.source.lang_code

    @property
    def tgt_lang(self):
        return self.target.lang_code

    def _rng(self, sentence: str):
        digest = hashlib.sha256(f"{self.seed}\x00{sentence}".encode("utf-8")).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little"))

    def translate(self, sentence: str) -> str:
        concepts = self.source.parse(sentence)
        toks = self.target.render(concepts).split()
        if not (self.drop or self.substitute):
            return " ".join(toks)
        rng = self._rng(sentence)
        vocab = sorted(self.target.lexicon.values())
        out = []
        for tok in toks:
            u_drop, u_sub, pick = rng.random(), rng.random(), int(rng.integers(0, len(vocab)))
            if u_drop < self.drop:
                continue
            out.append(vocab[pick] if u_sub < self.substitute else tok)
        return " ".join(out)


class SubprocessTranslator:
    """External translator: a child process reading and writing one sentence per line."""

    concurrent_safe = False

    def __init__(self, command: Sequence[str], src_lang: str, tgt_lang: str, timeout: float | None = None):
        self.command = list(command)
        self.src_lang = src_lang
        self.tgt_lang = tgt_lang
        self.timeout = timeout

    def translate_batch(self, sentences: Sequence[str]) -> list[str]:
        payload = "".join(s + "\n" for s in sentences)
        try:
            proc = subprocess.run(
                self.command,
                input=payload.encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise TranslatorFailure(f"translator process failed: {exc}") from exc
        if proc.returncode != 0:
            raise TranslatorFailure(
                f"translator exited with {proc.returncode}: {proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        lines = proc.stdout.decode("utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) != len(sentences):
            raise TranslatorFailure(f"translator returned {len(lines)} lines for {len(sentences)} inputs")
        return [line.rstrip("\r") for line in lines]

    def translate(self, sentence: str) -> str:
        return self.translate_batch([sentence])[0]


# -- synthetic corpora -------------------------------------------------------

def _call(translator, sentence):
    try:
        return check_sentence(translator.translate(sentence))
    except (TranslatorFailure, DataError) as exc:
        return exc


def translate_all(translator, sentences: Sequence[str], workers: int = 1) -> list:
    """Translate in input order; failures come back as exception objects."""
    batch = getattr(translator, "translate_batch", None)
    if batch is not None:
        try:
            return [check_sentence(s) for s in batch(list(sentences))]
        except (TranslatorFailure, DataError):
            # fall back to per-sentence calls so one bad row doesn't sink the batch
            return [_call(translator, s) for s in sentences]
    if workers > 1 and getattr(translator, "concurrent_safe", False):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: _call(translator, s), sentences))
    return [_call(translator, s) for s in sentences]


def _assemble(results, pairs, make_pair, src_lang, tgt_lang) -> ParallelCorpus:
    out, failed = [], []
    for i, (res, pair) in enumerate(zip(results, pairs)):
        if isinstance(res, Exception):
            failed.append(i)
        else:
            out.append(make_pair(pair, res))
    return ParallelCorpus(
        src_lang, tgt_lang, tuple(out), metadata={"failures": len(failed), "failed_rows": failed}
    )


def build_synthetic_target(src_pivot: ParallelCorpus, pivot_to_tgt, workers: int = 1) -> ParallelCorpus:
    if src_pivot.tgt_lang != pivot_to_tgt.src_lang:
        raise LanguageMismatch(
            f"corpus pivot is {src_pivot.tgt_lang!r} but translator reads {pivot_to_tgt.src_lang!r}"
        )
    results = translate_all(pivot_to_tgt, src_pivot.targets(), workers)
    return _assemble(
        results,
        src_pivot.pairs,
        lambda p, t: SentencePair(p.source, t, Provenance.SYNTHETIC_TARGET),
        src_pivot.src_lang,
        pivot_to_tgt.tgt_lang,
    )


def build_synthetic_source(pivot_tgt: ParallelCorpus, pivot_to_src, workers: int = 1) -> ParallelCorpus:
    if pivot_tgt.src_lang != pivot_to_src.src_lang:
        raise LanguageMismatch(
            f"corpus pivot is {pivot_tgt.src_lang!r} but translator reads {pivot_to_src.src_lang!r}"
        )
    results = translate_all(pivot_to_src, pivot_tgt.sources(), workers)
    return _assemble(
        results,
        pivot_tgt.pairs,
        lambda p, s: SentencePair(s, p.target, Provenance.SYNTHETIC_SOURCE),
        pivot_to_src.tgt_lang,
        pivot_tgt.tgt_lang,
    )


def extend(base: ParallelCorpus, synthetic: ParallelCorpus, total: int, seed: int) -> ParallelCorpus:
    if (base.src_lang, base.tgt_lang) != (synthetic.src_lang, synthetic.tgt_lang):
        raise LanguageMismatch(
            f"base is {base.src_lang}-{base.tgt_lang}, synthetic is {synthetic.src_lang}-{synthetic.tgt_lang}"
        )
    if total < len(base):
        raise DataError(f"total {total} is smaller than the base corpus ({len(base)})")
    need = total - len(base)
    if need > len(synthetic):
        raise InsufficientSynthetic(f"need {need} synthetic pairs, have {len(synthetic)}")
    extra = truncate(synthetic, need, seed)
    return base.replace_pairs(base.pairs + extra.pairs)


# -- toy spec files ----------------------------------------------------------

def load_toy_spec(path) -> ToyLanguageSpec:
    """Read a toy language file.

    Header lines are ``lang CODE``, ``grammar identity|reversed`` and
    ``length MIN MAX``; every other non-comment line is ``concept_id<TAB>token``.
    """
    lang = None
    grammar = Grammar.IDENTITY
    length = (3, 8)
    lexicon = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" in line:
                cid, tok = line.split("\t", 1)
                try:
                    lexicon[int(cid)] = tok
                except ValueError:
                    raise ConfigParse(f"{path}:{i}: bad concept id {cid!r}") from None
                continue
            key, *vals = line.split()
            try:
                if key == "lang":
                    (lang,) = vals
                elif key == "grammar":
                    grammar = Grammar(vals[0])
                elif key == "length":
                    length = (int(vals[0]), int(vals[1]))
                else:
                    raise ConfigParse(f"{path}:{i}: unknown key {key!r}")
            except (ValueError, IndexError):
                raise ConfigParse(f"{path}:{i}: cannot parse {line!r}") from None
    if lang is None:
        raise ConfigParse(f"{path}: missing 'lang' line")
    return ToyLanguageSpec(lang, lexicon, length, grammar)


def save_toy_spec(spec: ToyLanguageSpec, path) -> None:
    lines = [
        f"lang {spec.lang_code}",
        f"grammar {spec.grammar.value}",
        f"length {spec.sentence_length_range[0]} {spec.sentence_length_range[1]}",
    ]
    lines += [f"{c}\t{t}" for c, t in sorted(spec.lexicon.items())]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
