"""Byte-pair encoding over whitespace words.

Each word is split into characters followed by a separate end-of-word
symbol, so ``"low"`` starts as ``l o w </w>``. Training repeatedly merges the
most frequent adjacent pair inside words; equal counts go to the
lexicographically smallest ``(left, right)``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .corpus import atomic_write_text
from .errors import DataError, EmptyCorpus, TargetTooSmall

EOW = "</w>"
_ALPHABET_TAG = "#alphabet"


@dataclass(frozen=True)
class BpeModel:
    merges: tuple[tuple[str, str], ...]
    alphabet: tuple[str, ...]
    eow_marker: str = EOW
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @cached_property
    def ranks(self) -> dict[tuple[str, str], int]:
        ranks = {}
        for i, pair in enumerate(self.merges):
            ranks.setdefault(pair, i)
        return ranks

    @cached_property
    def ordered_vocab(self) -> tuple[str, ...]:
        """Alphabet, then the marker, then merge products in merge order."""
        seen = dict.fromkeys(self.alphabet)
        seen.setdefault(self.eow_marker)
        for left, right in self.merges:
            seen.setdefault(left + right)
        return tuple(seen)

    @property
    def vocab(self) -> frozenset[str]:
        return frozenset(self.ordered_vocab)

    def encode_word(self, word: str) -> tuple[str, ...]:
        try:
            return self._cache[word]
        except KeyError:
            pass
        symbols = apply_merges(list(word) + [self.eow_marker], self.merges, self.ranks)
        self._cache[word] = symbols
        return symbols


@dataclass(frozen=True)
class CoverageReport:
    covered_tokens: int
    total_tokens: int

    @property
    def coverage(self) -> float:
        if self.total_tokens == 0:
            return 1.0
        return self.covered_tokens / self.total_tokens


def _merge_pair(symbols: list[str], left: str, right: str) -> list[str]:
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def apply_merges(symbols: list[str], merges, ranks: dict[tuple[str, str], int]) -> tuple[str, ...]:
    # Same result as walking the merge list in order, skipping merges whose
    # pair is absent: always take the lowest-ranked present pair above the
    # last applied rank.
    last = -1
    while len(symbols) > 1:
        best = None
        for pair in zip(symbols, symbols[1:]):
            r = ranks.get(pair)
            if r is not None and r > last and (best is None or r < best):
                best = r
        if best is None:
            break
        symbols = _merge_pair(symbols, *merges[best])
        last = best
    return tuple(symbols)


def train_bpe(sentences: Iterable[str], target_vocab_size: int, eow_marker: str = EOW) -> BpeModel:
    word_counts = Counter()
    for s in sentences:
        word_counts.update(s.split())
    if not word_counts:
        raise EmptyCorpus("no words to train BPE on")
    alphabet = tuple(sorted({ch for w in word_counts for ch in w}))
    if target_vocab_size <= len(alphabet):
        raise TargetTooSmall(len(alphabet))

    vocab = set(alphabet) | {eow_marker}
    words = [(list(w) + [eow_marker], n) for w, n in sorted(word_counts.items())]
    merges = []
    while len(vocab) < target_vocab_size:
        pair_counts = Counter()
        for symbols, n in words:
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += n
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        vocab.add(best[0] + best[1])
        words = [(_merge_pair(symbols, *best), n) for symbols, n in words]
    return BpeModel(tuple(merges), alphabet, eow_marker)


def encode(model: BpeModel, sentence: str) -> list[str]:
    out = []
    for word in sentence.split():
        out.extend(model.encode_word(word))
    return out


def decode(symbols: Sequence[str], eow_marker: str = EOW) -> str:
    return "".join(symbols).replace(eow_marker, " ").rstrip(" ")


def encode_line(model: BpeModel, sentence: str) -> str:
    return " ".join(encode(model, sentence))


def decode_line(line: str, eow_marker: str = EOW) -> str:
    return decode(line.split(), eow_marker)


def coverage(model: BpeModel, sentences: Iterable[str], vocab_limit: Optional[int] = None) -> CoverageReport:
    """Share of words whose encoding stays inside the ``vocab_limit`` first symbols.

    A word containing a character outside the training alphabet is never
    covered.
    """
    allowed = model.ordered_vocab if vocab_limit is None else model.ordered_vocab[:vocab_limit]
    allowed = frozenset(allowed)
    covered = total = 0
    verdict = {}
    for s in sentences:
        for word in s.split():
            total += 1
            ok = verdict.get(word)
            if ok is None:
                ok = all(sym in allowed for sym in model.encode_word(word))
                verdict[word] = ok
            covered += ok
    return CoverageReport(covered, total)


def save_bpe(model: BpeModel, path) -> None:
    lines = [model.eow_marker, f"{_ALPHABET_TAG}\t{' '.join(model.alphabet)}"]
    lines += [f"{left} {right}" for left, right in model.merges]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_bpe(path) -> BpeModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty BPE model file")
    eow = lines[0]
    rest = lines[1:]
    alphabet = ()
    if rest and rest[0].startswith(_ALPHABET_TAG + "\t"):
        alphabet = tuple(rest[0].split("\t", 1)[1].split())
        rest = rest[1:]
    merges = []
    for i, line in enumerate(rest, start=len(lines) - len(rest) + 1):
        parts = line.split(" ")
        if len(parts) != 2 or not all(parts):
            raise DataError(f"{path}:{i}: expected 'left right'")
        merges.append((parts[0], parts[1]))
    if not alphabet:
        # files written without the alphabet line: recover what the merges imply
        chars = {ch for pair in merges for sym in pair for ch in sym.replace(eow, "")}
        alphabet = tuple(sorted(chars))
    return BpeModel(tuple(merges), alphabet, eow)
