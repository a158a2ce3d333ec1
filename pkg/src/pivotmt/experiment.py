"""End-to-end toy reproduction of the five-model experiment matrix.

Toy corpora stand in for the real ones:

* ``prod``: source-target bitext in the in-domain ("trip") concept range;
  the baseline is a seeded subset of it.
* ``src_pivot``: in-domain source-pivot bitext; translating its pivot side
  into the target language gives the synthetic-target corpus.
* ``pivot_tgt``: general-domain pivot-target bitext; translating its pivot
  side into the source language gives the synthetic-source corpus.
* ``wit_<lang>``: out-of-domain ("ted") bitexts from the extra source
  languages into the target, used by the multi-source variants.

Every variant is evaluated on an in-domain and an out-of-domain test set
with only the primary source language available.

Stages are cached on disk. Each stage directory stores a ``DIGEST`` of its
configuration and upstream digests and is rebuilt only when that changes.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ExperimentConfig
from .corpus import (
    AlignMode,
    FilterConfig,
    MultiWayCorpus,
    MultiWayRow,
    ParallelCorpus,
    align_multiway,
    atomic_write_text,
    filter_chain,
    load_multiway,
    load_tsv,
    save_multiway,
    save_tsv,
    truncate,
)
from .errors import ConfigParse, PivotMTError
from .evaluation import bleu4, format_pct, suffix_stub_segmenter, whitespace_segmenter
from .nmt import (
    Vocabulary,
    init_model,
    load_model,
    save_model,
    train,
    translate_batch,
    write_log,
)
from .subword import BpeModel, coverage, decode, encode_line, load_bpe, save_bpe, train_bpe
from .synth import (
    Grammar,
    NoisyDictionaryTranslator,
    ToyLanguageSpec,
    build_synthetic_source,
    build_synthetic_target,
    extend,
    generate_toy_multiway,
    load_toy_spec,
    make_toy_language,
    save_toy_spec,
)

log = logging.getLogger(__name__)

VARIANT_LABELS = {
    1: "(1) Baseline",
    2: "(2) (1) + MSM",
    3: "(3) (1) + Synthetic target",
    4: "(4) (1) + Synthetic source",
    5: "(5) (1) + Syn-Source + MSM",
}
TEST_SETS = ("TRIP", "TED")


class StageError(PivotMTError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause

    def __reduce__(self):  # survive the trip back from a worker process
        return StageError, (self.stage, self.cause)


def stage_seed(seed: int, *names) -> int:
    key = "\x00".join([str(seed), *map(str, names)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def digest(*parts) -> str:
    blob = json.dumps([__version__, *parts], sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple[tuple[str, str, float], ...]

    def score(self, variant: int, test: str) -> float:
        label = VARIANT_LABELS[variant]
        for m, t, b in self.rows:
            if m == label and t == test:
                return b
        raise KeyError((variant, test))

    def render_tsv(self) -> str:
        lines = ["model\ttest\tbleu"]
        lines += [f"{m}\t{t}\t{format_pct(b)}" for m, t, b in self.rows]
        return "\n".join(lines) + "\n"

    def render_tables(self) -> str:
        """Three side-by-side comparisons: synthetic data, multi-source, and both combined."""
        have = {m for m, _, _ in self.rows}

        def block(title, variants):
            variants = [v for v in variants if VARIANT_LABELS[v] in have]
            if not variants:
                return ""
            width = max(len(VARIANT_LABELS[v]) for v in variants) + 2
            out = [title, f"{'Model':<{width}}{'TRIP':>8}{'TED':>8}"]
            for v in variants:
                cells = "".join(f"{format_pct(self.score(v, t)):>8}" for t in TEST_SETS)
                out.append(f"{VARIANT_LABELS[v]:<{width}}{cells}")
            return "\n".join(out) + "\n"

        parts = [
            block("Extended corpus (synthetic data)", [1, 3, 4]),
            block("Multi-source model", [1, 2]),
            block("Multi-source model with extended corpus", [2, 4, 5]),
        ]
        return "\n".join(p for p in parts if p)


# -- toy world ---------------------------------------------------------------

def build_languages(cfg: ExperimentConfig) -> dict[str, ToyLanguageSpec]:
    general = cfg.domains["general"].length
    out = {}
    for code, lc in cfg.languages.items():
        if lc.spec_file:
            out[code] = load_toy_spec(lc.spec_file)
            continue
        try:
            grammar = Grammar(lc.grammar)
        except ValueError:
            raise ConfigParse(f"languages.{code}.grammar: unknown grammar {lc.grammar!r}") from None
        out[code] = make_toy_language(
            code,
            cfg.n_concepts,
            lc.alphabet,
            stage_seed(cfg.seed, "lexicon", code),
            grammar=grammar,
            length_range=general,
            stem_len=tuple(lc.stem_len),
            suffixes=lc.suffixes,
        )
    return out


def _gen(cfg, langs, src_codes, tgt_code, n, domain, name) -> MultiWayCorpus:
    d = cfg.domains[domain]
    return generate_toy_multiway(
        [langs[c] for c in src_codes],
        langs[tgt_code],
        n,
        stage_seed(cfg.seed, "corpus", name),
        concepts=d.pool,
        length_range=tuple(d.length),
    )


def _bitext(mw: MultiWayCorpus) -> ParallelCorpus:
    return mw.column(mw.source_langs[0])


def _corpora_config(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    return {k: d[k] for k in ("seed", "n_concepts", "languages", "roles", "domains", "sizes", "noise", "filter")}


def build_corpora(cfg: ExperimentConfig, out: Path) -> tuple[dict, str]:
    """Generate (or reload) every toy corpus and the two synthetic corpora."""
    r, s = cfg.roles, cfg.sizes
    stage = out / "corpora"
    key = digest("corpora", _corpora_config(cfg))
    names = ["base", "dev", "trip_test", "ted_test", "src_pivot", "pivot_tgt", "syn_target", "syn_source"]
    names += [f"wit_{x}" for x in r.extra_sources]
    pair_langs = {
        "base": (r.source, r.target),
        "dev": (r.source, r.target),
        "trip_test": (r.source, r.target),
        "ted_test": (r.source, r.target),
        "src_pivot": (r.source, r.pivot),
        "pivot_tgt": (r.pivot, r.target),
        "syn_target": (r.source, r.target),
        "syn_source": (r.source, r.target),
        **{f"wit_{x}": (x, r.target) for x in r.extra_sources},
    }
    if _cached(stage, key):
        log.info("corpora: reusing %s", stage)
        return {n: load_tsv(stage / f"{n}.tsv", *pair_langs[n]) for n in names}, key

    langs = build_languages(cfg)
    src, piv, tgt = r.source, r.pivot, r.target
    c = {}
    prod = _bitext(_gen(cfg, langs, [src], tgt, s.prod_pool, "trip", "prod"))
    c["base"] = truncate(prod, s.baseline, stage_seed(cfg.seed, "truncate", "base"))
    c["dev"] = _bitext(_gen(cfg, langs, [src], tgt, s.dev, "trip", "dev"))
    c["trip_test"] = _bitext(_gen(cfg, langs, [src], tgt, s.trip_test, "trip", "trip_test"))
    c["ted_test"] = _bitext(_gen(cfg, langs, [src], tgt, s.ted_test, "ted", "ted_test"))
    c["src_pivot"] = _bitext(_gen(cfg, langs, [src], piv, s.src_pivot_pool, "trip", "src_pivot"))
    c["pivot_tgt"] = _bitext(_gen(cfg, langs, [piv], tgt, s.pivot_tgt_pool, "general", "pivot_tgt"))
    for x in r.extra_sources:
        c[f"wit_{x}"] = _bitext(_gen(cfg, langs, [x], tgt, s.wit_pool, "ted", f"wit_{x}"))

    fcfg = FilterConfig(cfg.filter.min_len, cfg.filter.max_len, cfg.filter.max_ratio, cfg.filter.unk_symbol)
    to_tgt = NoisyDictionaryTranslator(
        langs[piv], langs[tgt], cfg.noise.pivot_to_target, cfg.noise.substitute, stage_seed(cfg.seed, "mt", "tgt")
    )
    to_src = NoisyDictionaryTranslator(
        langs[piv], langs[src], cfg.noise.pivot_to_source, cfg.noise.substitute, stage_seed(cfg.seed, "mt", "src")
    )
    c["syn_target"] = filter_chain(build_synthetic_target(c["src_pivot"], to_tgt), fcfg)
    c["syn_source"] = filter_chain(build_synthetic_source(c["pivot_tgt"], to_src), fcfg)

    tmp = _fresh(stage)
    for code, spec in langs.items():
        save_toy_spec(spec, tmp / f"{code}.lang")
    for n in names:
        save_tsv(c[n], tmp / f"{n}.tsv")
    _commit(tmp, stage, key)
    return c, key


def variant_corpus(cfg: ExperimentConfig, c: dict, variant: int) -> MultiWayCorpus:
    r, s = cfg.roles, cfg.sizes
    seed = stage_seed(cfg.seed, "extend", variant)
    base = c["base"]
    if variant == 1:
        parts = [base]
    elif variant == 2:
        parts = [base] + [truncate(c[f"wit_{x}"], s.msm_extra, stage_seed(cfg.seed, "wit", x, s.msm_extra))
                          for x in r.extra_sources]
    elif variant == 3:
        parts = [extend(base, c["syn_target"], s.synthetic_total, seed)]
    elif variant == 4:
        parts = [extend(base, c["syn_source"], s.synthetic_total, seed)]
    elif variant == 5:
        parts = [extend(base, c["syn_source"], s.combined_per_lang, seed)]
        parts += [truncate(c[f"wit_{x}"], s.combined_per_lang, stage_seed(cfg.seed, "wit", x, s.combined_per_lang))
                  for x in r.extra_sources]
    else:
        raise ConfigParse(f"unknown variant {variant}")
    return align_multiway(parts, AlignMode.DISJOINT)


# -- per-variant pipeline ----------------------------------------------------

def _encode_multiway(mw: MultiWayCorpus, src_bpe: Sequence[BpeModel], tgt_bpe: BpeModel) -> MultiWayCorpus:
    rows = []
    for row in mw:
        srcs = tuple(None if x is None else encode_line(b, x) for x, b in zip(row.sources, src_bpe))
        rows.append(MultiWayRow(srcs, encode_line(tgt_bpe, row.target)))
    return MultiWayCorpus(mw.source_langs, mw.tgt_lang, tuple(rows))


def _as_source_only(bitext: ParallelCorpus, langs: Sequence[str]) -> MultiWayCorpus:
    k = list(langs).index(bitext.src_lang)
    rows = []
    for p in bitext:
        srcs = [None] * len(langs)
        srcs[k] = p.source
        rows.append(MultiWayRow(tuple(srcs), p.target))
    return MultiWayCorpus(tuple(langs), bitext.tgt_lang, tuple(rows))


def translate_texts(model, src_bpe, tgt_bpe, sources: MultiWayCorpus, max_len: int, chunk: int = 64) -> list[str]:
    """Translate raw (un-segmented) multi-way rows into raw target sentences."""
    rows = []
    for row in sources:
        rows.append([
            None if x is None else v.ids(encode_line(b, x).split())
            for x, b, v in zip(row.sources, src_bpe, model.src_vocabs)
        ])
    out = []
    for start in range(0, len(rows), chunk):
        for ids in translate_batch(model, rows[start : start + chunk], max_len):
            out.append(decode(model.tgt_vocab.tokens(ids), tgt_bpe.eow_marker))
    return out


def run_variant(cfg: ExperimentConfig, corpora: dict, corpora_key: str, variant: int, out: Path) -> dict:
    stage = out / "variants" / f"v{variant}"
    key = digest("variant", variant, corpora_key, cfg.to_dict()["bpe"], cfg.to_dict()["model"])
    if _cached(stage, key):
        log.info("variant %d: reusing %s", variant, stage)
        return json.loads((stage / "scores.json").read_text(encoding="utf-8"))

    r = cfg.roles
    mw = variant_corpus(cfg, corpora, variant)
    langs = list(mw.source_langs)
    src_bpe = [train_bpe(mw.column(l).sources(), cfg.bpe.src_vocab) for l in langs]
    tgt_bpe = train_bpe([row.target for row in mw], cfg.bpe.tgt_vocab)
    enc = _encode_multiway(mw, src_bpe, tgt_bpe)
    src_vocabs = [Vocabulary.build(s.split() for s in enc.column(l).sources()) for l in langs]
    tgt_vocab = Vocabulary.build(row.target.split() for row in enc)
    hp = cfg.model.hyperparams([len(v) for v in src_vocabs], len(tgt_vocab), stage_seed(cfg.seed, "model", variant))
    model = init_model(hp, src_vocabs=src_vocabs, tgt_vocab=tgt_vocab, source_langs=langs, tgt_lang=r.target)
    dev = _encode_multiway(_as_source_only(corpora["dev"], langs), src_bpe, tgt_bpe)

    log.info("variant %d: training on %d rows (%s)", variant, len(mw), ",".join(langs))
    model, history = train(model, enc, schedule=cfg.model.schedule(), dev=dev)

    seg = suffix_stub_segmenter(cfg.languages[r.target].suffixes) if cfg.languages[r.target].suffixes \
        else whitespace_segmenter()
    scores, hyps = {}, {}
    for test, name in zip(TEST_SETS, ("trip_test", "ted_test")):
        bitext = corpora[name]
        hyp = translate_texts(model, src_bpe, tgt_bpe, _as_source_only(bitext, langs), cfg.model.max_decode_len)
        report = bleu4(hyp, bitext.targets(), seg)
        scores[test] = report.bleu
        hyps[test] = hyp

    tmp = _fresh(stage)
    save_multiway(mw, tmp / "train.tsv")
    for l, b in zip(langs, src_bpe):
        save_bpe(b, tmp / f"bpe.{l}")
    save_bpe(tgt_bpe, tmp / f"bpe.{r.target}")
    save_model(model, tmp / "model.npz")
    write_log(history, tmp / "train_log.tsv")
    atomic_write_text(tmp / "dev_loss.tsv", "".join(f"{h.epoch}\t{h.dev_loss!r}\n" for h in history))
    cov = coverage(src_bpe[langs.index(r.source)], corpora["dev"].sources()).coverage
    for test in TEST_SETS:
        atomic_write_text(tmp / f"hyp.{test.lower()}.txt", "".join(h + "\n" for h in hyps[test]))
    result = {"variant": variant, "label": VARIANT_LABELS[variant], "bleu": scores,
              "train_rows": len(mw), "dev_source_coverage": cov,
              "final_loss": history[-1].mean_loss if history else None}
    atomic_write_text(tmp / "scores.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    _commit(tmp, stage, key)
    return result


def _variant_job(args):
    cfg, corpora, corpora_key, variant, out = args
    try:
        return run_variant(cfg, corpora, corpora_key, variant, out)
    except PivotMTError as exc:
        raise StageError(f"variant {variant}", exc) from exc


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> ScoreTable:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    try:
        corpora, ckey = build_corpora(cfg, out)
    except PivotMTError as exc:
        raise StageError("corpora", exc) from exc
    args = [(cfg, corpora, ckey, v, out) for v in sorted(cfg.variants)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_variant_job, args))
    else:
        results = [_variant_job(a) for a in args]
    rows = []
    for res in results:
        for test in TEST_SETS:
            rows.append((res["label"], test, float(res["bleu"][test])))
    table = ScoreTable(tuple(rows))
    atomic_write_text(out / "scores.tsv", table.render_tsv())
    atomic_write_text(out / "tables.txt", table.render_tables())
    return table


# -- stage cache helpers -----------------------------------------------------

def _cached(stage: Path, key: str) -> bool:
    f = stage / "DIGEST"
    return f.is_file() and f.read_text(encoding="utf-8").strip() == key


def _fresh(stage: Path) -> Path:
    tmp = stage.with_name(stage.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    return tmp


def _commit(tmp: Path, stage: Path, key: str) -> None:
    atomic_write_text(tmp / "DIGEST", key + "\n")
    if stage.exists():
        shutil.rmtree(stage)
    os.replace(tmp, stage)


# -- auxiliary toy studies ---------------------------------------------------

def complementary_task(
    n_train: int = 1000,
    n_test: int = 200,
    n_concepts: int = 16,
    half_len: tuple[int, int] = (2, 4),
    emb_dim: int = 32,
    hidden_dim: int = 64,
    epochs: int = 20,
    batch_size: int = 4,
    seed: int = 7,
) -> dict[str, float]:
    """Two-source task where each source carries half of the target.

    Source A renders the first half of a concept sequence, source B the
    second half, and the target renders the whole sequence. Returns BLEU for
    the dual-encoder model and for each single-encoder model.
    """
    import numpy as np

    from .nmt import Hyperparams
    from .nmt.train import Schedule

    la = make_toy_language("sa", n_concepts, "abcdefgh", stage_seed(seed, "sa"))
    lb = make_toy_language("sb", n_concepts, "pqrstuvw", stage_seed(seed, "sb"), grammar=Grammar.REVERSED)
    lt = make_toy_language("tg", n_concepts, "ABCDEFGH", stage_seed(seed, "tg"))
    rng = np.random.default_rng(seed)

    def rows(n):
        out = []
        for _ in range(n):
            a = [int(c) for c in rng.integers(0, n_concepts, size=rng.integers(half_len[0], half_len[1] + 1))]
            b = [int(c) for c in rng.integers(0, n_concepts, size=rng.integers(half_len[0], half_len[1] + 1))]
            out.append((la.render(a), lb.render(b), lt.render(a + b)))
        return out

    train_rows, test_rows = rows(n_train), rows(n_test)
    vocab_a = Vocabulary.build(r[0].split() for r in train_rows)
    vocab_b = Vocabulary.build(r[1].split() for r in train_rows)
    vocab_t = Vocabulary.build(r[2].split() for r in train_rows)
    refs = [r[2] for r in test_rows]
    results = {}
    setups = {"dual": (0, 1), "single_a": (0,), "single_b": (1,)}
    for name, use in setups.items():
        vocabs = [(vocab_a, vocab_b)[i] for i in use]
        hp = Hyperparams(emb_dim=emb_dim, hidden_dim=hidden_dim, enc_layers=1,
                         vocab_size_src=tuple(len(v) for v in vocabs), vocab_size_tgt=len(vocab_t),
                         epochs=epochs, batch_size=batch_size, seed=stage_seed(seed, "model", name))
        model = init_model(hp, src_vocabs=vocabs, tgt_vocab=vocab_t)
        ex = [([v.ids(r[i].split()) for i, v in zip(use, vocabs)], vocab_t.ids(r[2].split())) for r in train_rows]
        model, _ = train(model, ex, schedule=Schedule())
        srcs = [[v.ids(r[i].split()) for i, v in zip(use, vocabs)] for r in test_rows]
        hyp = [" ".join(vocab_t.tokens(ids)) for ids in translate_batch(model, srcs, 2 * half_len[1] + 4)]
        results[name] = bleu4(hyp, refs).bleu
    return results


def noise_sweep(levels: Sequence[float] = (0.0, 0.1, 0.3), n_rows: int = 500, seed: int = 11) -> dict[float, float]:
    """BLEU of noisy pivot-to-target output against the exact translation."""
    pivot = make_toy_language("en", 40, "abcdefghiklmnop", stage_seed(seed, "en"), length_range=(3, 8))
    target = make_toy_language("ar", 40, "ابتثجحخدذرزسش", stage_seed(seed, "ar"), length_range=(3, 8))
    mw = generate_toy_multiway([pivot], target, n_rows, seed)
    pivots = [row.sources[0] for row in mw]
    refs = [row.target for row in mw]
    out = {}
    for p in levels:
        mt = NoisyDictionaryTranslator(pivot, target, drop=p, seed=seed)
        out[p] = bleu4([mt.translate(s) for s in pivots], refs).bleu
    return out
