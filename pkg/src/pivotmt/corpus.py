"""Parallel and N-way corpora: data model, file I/O, filtering and alignment.

Sentences are plain ``str`` values. Filtering tokenizes by whitespace, since
it runs before any subword segmentation.
"""
from __future__ import annotations

import enum
import io
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    EncodingError,
    LanguageCollision,
    LineCountMismatch,
    TargetMismatch,
)

__all__ = [
    "Provenance",
    "SentencePair",
    "ParallelCorpus",
    "MultiWayRow",
    "MultiWayCorpus",
    "FilterConfig",
    "AlignMode",
    "load_parallel",
    "save_parallel",
    "load_tsv",
    "save_tsv",
    "load_multiway",
    "save_multiway",
    "length_filter",
    "dedup",
    "unk_filter",
    "filter_chain",
    "truncate",
    "align_multiway",
    "atomic_write_text",
]


class Provenance(enum.Enum):
    ORIGINAL = "original"
    SYNTHETIC_SOURCE = "synthetic-source"
    SYNTHETIC_TARGET = "synthetic-target"


def check_sentence(text: str) -> str:
    if "\n" in text or "\r" in text:
        raise DataError(f"sentence contains a line break: {text!r}")
    return text


def tokens(text: str) -> list[str]:
    return text.split()


@dataclass(frozen=True)
class SentencePair:
    source: str
    target: str
    provenance: Provenance = Provenance.ORIGINAL

    def __post_init__(self):
        check_sentence(self.source)
        check_sentence(self.target)


@dataclass(frozen=True)
class ParallelCorpus:
    src_lang: str
    tgt_lang: str
    pairs: tuple[SentencePair, ...] = ()
    # e.g. translator failure counts; not part of equality
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not isinstance(self.pairs, tuple):
            object.__setattr__(self, "pairs", tuple(self.pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def sources(self) -> list[str]:
        return [p.source for p in self.pairs]

    def targets(self) -> list[str]:
        return [p.target for p in self.pairs]

    def replace_pairs(self, pairs: Iterable[SentencePair]) -> "ParallelCorpus":
        return ParallelCorpus(self.src_lang, self.tgt_lang, tuple(pairs))

    @classmethod
    def from_texts(cls, src_lang, tgt_lang, sources, targets, provenance=Provenance.ORIGINAL):
        if len(sources) != len(targets):
            raise LineCountMismatch(len(sources), len(targets))
        return cls(
            src_lang,
            tgt_lang,
            tuple(SentencePair(s, t, provenance) for s, t in zip(sources, targets)),
        )


@dataclass(frozen=True)
class MultiWayRow:
    sources: tuple[Optional[str], ...]
    target: str

    @property
    def mask(self) -> tuple[bool, ...]:
        return tuple(s is not None for s in self.sources)


@dataclass(frozen=True)
class MultiWayCorpus:
    source_langs: tuple[str, ...]
    tgt_lang: str
    rows: tuple[MultiWayRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source_langs", tuple(self.source_langs))
        object.__setattr__(self, "rows", tuple(self.rows))
        if len(set(self.source_langs)) != len(self.source_langs):
            raise LanguageCollision(f"duplicate source languages: {self.source_langs}")
        n = len(self.source_langs)
        for i, row in enumerate(self.rows):
            if len(row.sources) != n:
                raise DataError(f"row {i} has {len(row.sources)} source cells, expected {n}")
            if not any(row.mask):
                raise DataError(f"row {i} has no available source")
            check_sentence(row.target)
            for s in row.sources:
                if s is not None:
                    check_sentence(s)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, lang: str) -> ParallelCorpus:
        """The rows that have ``lang`` available, as a bitext into the target."""
        k = self.source_langs.index(lang)
        pairs = [SentencePair(r.sources[k], r.target) for r in self.rows if r.sources[k] is not None]
        return ParallelCorpus(lang, self.tgt_lang, tuple(pairs))


@dataclass(frozen=True)
class FilterConfig:
    min_len: int = 1
    max_len: int = 100
    max_ratio: float = 3.0
    unk_symbol: str = "<unk>"

    def __post_init__(self):
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")
        if self.max_ratio < 1:
            raise ValueError("max_ratio must be >= 1")


# -- I/O ---------------------------------------------------------------------

def read_lines(path) -> list[str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for i, line in enumerate(lines, start=1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError:
            raise EncodingError(i, path) from None
        out.append(text.rstrip("\r"))
    return out


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` as UTF-8 with LF endings via a temp file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with io.open(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lines_text(lines: Sequence[str]) -> str:
    return "".join(line + "\n" for line in lines)


def load_parallel(src_path, tgt_path, src_lang: str, tgt_lang: str) -> ParallelCorpus:
    src = read_lines(src_path)
    tgt = read_lines(tgt_path)
    if len(src) != len(tgt):
        raise LineCountMismatch(len(src), len(tgt))
    return ParallelCorpus.from_texts(src_lang, tgt_lang, src, tgt)


def save_parallel(corpus: ParallelCorpus, src_path, tgt_path) -> None:
    atomic_write_text(src_path, _lines_text(corpus.sources()))
    atomic_write_text(tgt_path, _lines_text(corpus.targets()))


def load_tsv(path, src_lang: str, tgt_lang: str) -> ParallelCorpus:
    """Two-column ``source<TAB>target`` file, no header."""
    sources, targets = [], []
    for i, line in enumerate(read_lines(path), start=1):
        cells = line.split("\t")
        if len(cells) != 2:
            raise DataError(f"{path}:{i}: expected 2 tab-separated columns, got {len(cells)}")
        sources.append(cells[0])
        targets.append(cells[1])
    return ParallelCorpus.from_texts(src_lang, tgt_lang, sources, targets)


def save_tsv(corpus: ParallelCorpus, path) -> None:
    for p in corpus:
        if "\t" in p.source or "\t" in p.target:
            raise DataError("sentence contains a tab; cannot write TSV")
    atomic_write_text(path, _lines_text([f"{p.source}\t{p.target}" for p in corpus]))


def load_multiway(path) -> MultiWayCorpus:
    lines = read_lines(path)
    if not lines:
        raise DataError(f"{path}: missing header row")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise DataError(f"{path}: header needs at least one source language and the target")
    langs, tgt_lang = header[:-1], header[-1]
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(header):
            raise DataError(f"{path}:{i}: expected {len(header)} columns, got {len(cells)}")
        srcs = tuple(c if c != "" else None for c in cells[:-1])
        rows.append(MultiWayRow(srcs, cells[-1]))
    return MultiWayCorpus(tuple(langs), tgt_lang, tuple(rows))


def save_multiway(corpus: MultiWayCorpus, path) -> None:
    out = ["\t".join(corpus.source_langs + (corpus.tgt_lang,))]
    for row in corpus:
        cells = [s if s is not None else "" for s in row.sources] + [row.target]
        if any("\t" in c for c in cells):
            raise DataError("sentence contains a tab; cannot write TSV")
        out.append("\t".join(cells))
    atomic_write_text(path, _lines_text(out))


# -- filters -----------------------------------------------------------------

def _length_ok(pair: SentencePair, cfg: FilterConfig) -> bool:
    ns = len(tokens(pair.source))
    nt = len(tokens(pair.target))
    if not (cfg.min_len <= ns <= cfg.max_len and cfg.min_len <= nt <= cfg.max_len):
        return False
    return max(ns / nt, nt / ns) <= cfg.max_ratio


def length_filter(corpus: ParallelCorpus, cfg: FilterConfig) -> ParallelCorpus:
    return corpus.replace_pairs(p for p in corpus if _length_ok(p, cfg))


def dedup(corpus: ParallelCorpus) -> ParallelCorpus:
    seen = set()
    kept = []
    for p in corpus:
        key = (p.source, p.target)
        if key not in seen:
            seen.add(key)
            kept.append(p)
    return corpus.replace_pairs(kept)


def unk_filter(corpus: ParallelCorpus, unk_symbol: str = "<unk>") -> ParallelCorpus:
    return corpus.replace_pairs(
        p for p in corpus if unk_symbol not in p.source and unk_symbol not in p.target
    )


def filter_chain(corpus: ParallelCorpus, cfg: FilterConfig) -> ParallelCorpus:
    """Length filtering, deduplication, then ``<unk>`` removal."""
    return unk_filter(dedup(length_filter(corpus, cfg)), cfg.unk_symbol)


def truncate(corpus: ParallelCorpus, n: int, seed: int) -> ParallelCorpus:
    if n < 0:
        raise ValueError("n must be >= 0")
    if n >= len(corpus):
        return corpus
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(corpus), size=n, replace=False))
    return corpus.replace_pairs(corpus.pairs[i] for i in keep)


# -- alignment ---------------------------------------------------------------

class AlignMode(enum.Enum):
    BY_TARGET_KEY = "by-target"
    DISJOINT = "disjoint"


def align_multiway(corpora: Sequence[ParallelCorpus], mode: AlignMode) -> MultiWayCorpus:
    if not corpora:
        raise DataError("no corpora to align")
    tgt_lang = corpora[0].tgt_lang
    if any(c.tgt_lang != tgt_lang for c in corpora):
        raise TargetMismatch(f"corpora disagree on target language: {[c.tgt_lang for c in corpora]}")
    langs = tuple(c.src_lang for c in corpora)
    if len(set(langs)) != len(langs):
        raise LanguageCollision(f"source languages are not distinct: {langs}")
    n = len(langs)

    if mode is AlignMode.DISJOINT:
        rows = []
        for k, c in enumerate(corpora):
            for p in c:
                srcs = [None] * n
                srcs[k] = p.source
                rows.append(MultiWayRow(tuple(srcs), p.target))
        return MultiWayCorpus(langs, tgt_lang, tuple(rows))

    # by target key: first occurrence of each target per corpus, ordered as in the first corpus
    index = []
    for c in corpora:
        first = {}
        for p in c:
            first.setdefault(p.target, p.source)
        index.append(first)
    rows = []
    for target in index[0]:
        if all(target in idx for idx in index[1:]):
            rows.append(MultiWayRow(tuple(idx[target] for idx in index), target))
    return MultiWayCorpus(langs, tgt_lang, tuple(rows))
