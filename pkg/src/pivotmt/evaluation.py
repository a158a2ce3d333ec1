"""Corpus-level BLEU-4 with a pluggable segmenter applied before scoring."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Protocol, Sequence

from .errors import EmptyCorpus, LengthMismatch

MAX_N = 4


class Segmenter(Protocol):
    def __call__(self, sentence: str) -> list[str]: ...


def whitespace_segmenter() -> Segmenter:
    return lambda sentence: sentence.split()


def suffix_stub_segmenter(suffixes: Sequence[str]) -> Segmenter:
    """Split each word as ``stem suffix`` when it ends in one of ``suffixes``.

    The longest matching suffix wins and at most one suffix is split off. A
    word that is itself a suffix, or shorter than it, stays whole so no empty
    stem is produced.
    """
    ordered = sorted({s for s in suffixes if s}, key=lambda s: (-len(s), s))

    def segment(sentence: str) -> list[str]:
        out = []
        for word in sentence.split():
            for suf in ordered:
                if len(word) > len(suf) and word.endswith(suf):
                    out.append(word[: -len(suf)])
                    out.append(suf)
                    break
            else:
                out.append(word)
        return out

    return segment


def format_pct(bleu: float) -> str:
    """Render a [0, 1] score as a percentage rounded half-up to 2 decimals."""
    pct = (Decimal(repr(float(bleu))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{pct:.2f}"


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: tuple[int, ...] = ()
    totals: tuple[int, ...] = ()

    @property
    def percent(self) -> str:
        return format_pct(self.bleu)

    def as_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "bleu_pct": self.percent,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
        }


def ngram_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int = MAX_N):
    """Clipped n-gram matches and hypothesis n-gram totals for n = 1..max_n."""
    matches, totals = [], []
    for n in range(1, max_n + 1):
        h = Counter(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
        r = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals


def bleu_from_stats(matches, totals, hyp_len, ref_len, smooth=False) -> BleuReport:
    if smooth:
        precisions = tuple((m + 1) / (t + 1) for m, t in zip(matches, totals))
    else:
        precisions = tuple(m / t if t > 0 else 0.0 for m, t in zip(matches, totals))
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1 - ref_len / hyp_len))
    if hyp_len == 0 or min(precisions) <= 0:
        bleu = 0.0
    else:
        bleu = bp * math.exp(sum(math.log(p) for p in precisions) / len(precisions))
    return BleuReport(bleu, precisions, bp, hyp_len, ref_len, tuple(matches), tuple(totals))


def bleu4(
    hypotheses: Sequence[str],
    references: Sequence[str],
    seg: Callable[[str], list[str]] | None = None,
    *,
    smooth: bool = False,
    lowercase: bool = False,
) -> BleuReport:
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("BLEU needs at least one segment")
    seg = seg or whitespace_segmenter()
    matches = [0] * MAX_N
    totals = [0] * MAX_N
    hyp_len = ref_len = 0
    for h, r in zip(hypotheses, references):
        if lowercase:
            h, r = h.lower(), r.lower()
        ht, rt = seg(h), seg(r)
        m, t = ngram_stats(ht, rt)
        for i in range(MAX_N):
            matches[i] += m[i]
            totals[i] += t[i]
        hyp_len += len(ht)
        ref_len += len(rt)
    return bleu_from_stats(matches, totals, hyp_len, ref_len, smooth)
