from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<s>", "</s>")


@dataclass(frozen=True)
class Vocabulary:
    symbols: tuple[str, ...]
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if symbols[: len(SPECIALS)] != SPECIALS:
            symbols = SPECIALS + tuple(s for s in symbols if s not in SPECIALS)
        if len(set(symbols)) != len(symbols):
            raise ValueError("vocabulary symbols must be unique")
        object.__setattr__(self, "symbols", symbols)
        self._index.update((s, i) for i, s in enumerate(symbols))

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], max_size: Optional[int] = None) -> "Vocabulary":
        """Most frequent symbols first, ties alphabetical; ``max_size`` counts the specials."""
        counts = Counter()
        for toks in sentences:
            counts.update(toks)
        for s in SPECIALS:
            counts.pop(s, None)
        ordered = sorted(counts, key=lambda s: (-counts[s], s))
        if max_size is not None:
            ordered = ordered[: max(0, max_size - len(SPECIALS))]
        return cls(SPECIALS + tuple(ordered))

    @classmethod
    def of_size(cls, n: int) -> "Vocabulary":
        """Anonymous vocabulary ``t4 .. t{n-1}`` for id-level experiments."""
        return cls(SPECIALS + tuple(f"t{i}" for i in range(len(SPECIALS), n)))

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, sym):
        return sym in self._index

    def id(self, sym: str) -> int:
        return self._index.get(sym, UNK)

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self._index.get(t, UNK) for t in tokens]

    def tokens(self, ids: Sequence[int]) -> list[str]:
        out = []
        for i in ids:
            if i == EOS:
                break
            if i in (PAD, BOS):
                continue
            out.append(self.symbols[i])
        return out
