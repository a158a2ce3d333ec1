"""``pivotmt`` command line.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for data
errors, 3 when training diverges. Errors print ``ClassName: message`` on
standard error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys

from .errors import ConfigError, ConfigParse, DataError, DivergenceError, PivotMTError

log = logging.getLogger("pivotmt")

SEED_ENV = "PIVOTMT_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ConfigParse: {message}", file=sys.stderr)
        raise SystemExit(1)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigParse(f"{SEED_ENV}={raw!r} is not an integer") from None


def _seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _filter_config(args):
    from .corpus import FilterConfig

    return FilterConfig(args.min_len, args.max_len, args.max_ratio, args.unk)


def _load_pair(path, src, tgt):
    from .corpus import load_tsv

    return load_tsv(path, src, tgt)


# -- subcommands -------------------------------------------------------------

def cmd_filter(args):
    from .corpus import dedup, filter_chain, length_filter, save_tsv, unk_filter

    corpus = _load_pair(args.input, args.src_lang, args.tgt_lang)
    cfg = _filter_config(args)
    steps = args.steps.split(",") if args.steps else ["length", "dedup", "unk"]
    if steps == ["length", "dedup", "unk"]:
        out = filter_chain(corpus, cfg)
    else:
        ops = {"length": lambda c: length_filter(c, cfg), "dedup": dedup, "unk": lambda c: unk_filter(c, cfg.unk_symbol)}
        out = corpus
        for s in steps:
            if s not in ops:
                raise ConfigParse(f"unknown filter step {s!r}")
            out = ops[s](out)
    save_tsv(out, args.out)
    log.info("kept %d of %d pairs", len(out), len(corpus))


def cmd_bpe_train(args):
    from .corpus import read_lines
    from .subword import save_bpe, train_bpe

    model = train_bpe(read_lines(args.input), args.vocab)
    save_bpe(model, args.out)
    log.info("learned %d merges, vocabulary %d", len(model.merges), len(model.vocab))


def _map_lines(args, fn):
    from .corpus import read_lines, atomic_write_text

    lines = read_lines(args.input) if args.input != "-" else sys.stdin.read().splitlines()
    text = "".join(fn(x) + "\n" for x in lines)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(args.out, text)


def cmd_bpe_apply(args):
    from .subword import encode_line, load_bpe

    model = load_bpe(args.model)
    _map_lines(args, lambda s: encode_line(model, s))


def cmd_bpe_decode(args):
    from .subword import EOW, decode_line

    _map_lines(args, lambda s: decode_line(s, args.marker or EOW))


def _make_translator(spec: str, args):
    from .synth import NoisyDictionaryTranslator, SubprocessTranslator, load_toy_spec

    kind, _, rest = spec.partition(":")
    if kind == "dict":
        paths = rest.split(",")
        if len(paths) != 2:
            raise ConfigParse("--translator dict:FROM.lang,TO.lang needs two language files")
        src, tgt = (load_toy_spec(p) for p in paths)
        return NoisyDictionaryTranslator(src, tgt, args.noise, args.substitute, _seed(args))
    if kind == "cmd":
        if not args.from_lang or not args.to_lang:
            raise ConfigParse("--translator cmd:... needs --from-lang and --to-lang")
        return SubprocessTranslator(shlex.split(rest), args.from_lang, args.to_lang, args.timeout)
    raise ConfigParse(f"unknown translator {spec!r}; use dict:FROM.lang,TO.lang or cmd:COMMAND")


def cmd_synth(args):
    from .corpus import FilterConfig, filter_chain, save_tsv
    from .synth import build_synthetic_source, build_synthetic_target

    mt = _make_translator(args.translator, args)
    if args.mode == "source":
        if not args.pivot_tgt:
            raise ConfigParse("--mode source needs --pivot-tgt")
        corpus = _load_pair(args.pivot_tgt, mt.src_lang, args.tgt_lang)
        out = build_synthetic_source(corpus, mt, workers=args.workers)
    else:
        if not args.src_pivot:
            raise ConfigParse("--mode target needs --src-pivot")
        corpus = _load_pair(args.src_pivot, args.src_lang, mt.src_lang)
        out = build_synthetic_target(corpus, mt, workers=args.workers)
    if args.filter:
        out = filter_chain(out, FilterConfig())
    save_tsv(out, args.out)
    failures = out.metadata.get("failures", 0)
    log.info("wrote %d synthetic pairs (%d failed rows)", len(out), failures)


def cmd_align(args):
    from .corpus import AlignMode, align_multiway, save_multiway

    if len(args.inputs) != len(args.langs):
        raise ConfigParse("--langs must name one source language per input")
    corpora = [_load_pair(p, l, args.tgt_lang) for p, l in zip(args.inputs, args.langs)]
    mw = align_multiway(corpora, AlignMode(args.mode))
    save_multiway(mw, args.out)
    log.info("aligned %d rows", len(mw))


def cmd_train(args):
    from .corpus import load_multiway
    from .nmt import Hyperparams, Schedule, Vocabulary, init_model, save_model, train

    mw = load_multiway(args.corpus)
    dev = load_multiway(args.dev) if args.dev else None
    src_vocabs = [Vocabulary.build((s.split() for s in mw.column(l).sources()), args.src_vocab)
                  for l in mw.source_langs]
    tgt_vocab = Vocabulary.build((row.target.split() for row in mw), args.tgt_vocab)
    hp = Hyperparams(
        emb_dim=args.emb, hidden_dim=args.hidden, enc_layers=args.layers,
        vocab_size_src=tuple(len(v) for v in src_vocabs), vocab_size_tgt=len(tgt_vocab),
        learning_rate=args.lr, epochs=args.epochs, grad_clip_norm=args.clip,
        seed=_seed(args), batch_size=args.batch_size, bridge=not args.no_bridge,
    )
    model = init_model(hp, src_vocabs=src_vocabs, tgt_vocab=tgt_vocab,
                       source_langs=list(mw.source_langs), tgt_lang=mw.tgt_lang)
    model, _ = train(model, mw, schedule=Schedule(args.decay, args.decay_start, args.decay_every),
                     dev=dev, log_path=args.log)
    save_model(model, args.out)


def cmd_translate(args):
    from .corpus import atomic_write_text, read_lines
    from .nmt import load_model, translate_batch

    model = load_model(args.model)
    langs = list(model.source_langs or [])
    if len(args.inputs) != len(args.langs):
        raise ConfigParse("--langs must name one source language per input")
    columns = {}
    for path, lang in zip(args.inputs, args.langs):
        if lang not in langs:
            raise DataError(f"model has no encoder for {lang!r}; it knows {langs}")
        columns[lang] = read_lines(path)
    n = {len(c) for c in columns.values()}
    if len(n) != 1:
        from .errors import LineCountMismatch

        sizes = sorted(n)
        raise LineCountMismatch(sizes[0], sizes[-1])
    (n_rows,) = n
    rows = []
    for i in range(n_rows):
        row = []
        for l, v in zip(langs, model.src_vocabs):
            text = columns.get(l, [None] * n_rows)[i]
            row.append(None if not text else v.ids(text.split()))
        rows.append(row)
    out = []
    for start in range(0, n_rows, args.chunk):
        for ids in translate_batch(model, rows[start : start + args.chunk], args.max_len):
            out.append(" ".join(model.tgt_vocab.tokens(ids)))
    text = "".join(s + "\n" for s in out)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(args.out, text)


def cmd_evaluate(args):
    from .corpus import read_lines
    from .evaluation import bleu4, suffix_stub_segmenter

    hyps, refs = read_lines(args.hyp), read_lines(args.ref)
    seg = suffix_stub_segmenter(args.suffixes.split(",")) if args.suffixes else None
    report = bleu4(hyps, refs, seg, smooth=args.smooth, lowercase=args.lowercase)
    if args.format == "json":
        print(json.dumps(report.as_dict(), sort_keys=True))
    else:
        d = report.as_dict()
        for k, v in d.items():
            if isinstance(v, (list, tuple)):
                v = " ".join(repr(x) for x in v)
            print(f"{k}\t{v}")


def cmd_experiment(args):
    from .config import ExperimentConfig, load_config
    from .experiment import run_experiment

    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None or SEED_ENV in os.environ:
        cfg.seed = _seed(args)
    table = run_experiment(cfg, args.out, jobs=args.jobs)
    print(table.render_tables(), end="")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pivotmt", description="Pivot-based corpus extension and multi-source NMT on toy languages.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=None, help=f"overrides ${SEED_ENV}")
        sp.set_defaults(func=fn)
        return sp

    def filter_opts(sp):
        sp.add_argument("--min-len", type=int, default=1)
        sp.add_argument("--max-len", type=int, default=100)
        sp.add_argument("--max-ratio", type=float, default=3.0)
        sp.add_argument("--unk", default="<unk>")

    sp = add("filter", cmd_filter, "length / dedup / unk filtering of a TSV bitext")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--src-lang", default="src")
    sp.add_argument("--tgt-lang", default="tgt")
    sp.add_argument("--steps", help="comma-separated subset of length,dedup,unk (default: all, in that order)")
    filter_opts(sp)

    sp = add("bpe-train", cmd_bpe_train, "learn BPE merges from a text file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--vocab", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("bpe-apply", cmd_bpe_apply, "segment text with a learned BPE model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", default="-")
    sp.add_argument("--out", default="-")

    sp = add("bpe-decode", cmd_bpe_decode, "undo BPE segmentation")
    sp.add_argument("--input", default="-")
    sp.add_argument("--out", default="-")
    sp.add_argument("--marker", default=None)

    sp = add("synth", cmd_synth, "build a synthetic-source or synthetic-target corpus")
    sp.add_argument("--mode", choices=["source", "target"], required=True)
    sp.add_argument("--pivot-tgt", help="pivot-target TSV (mode source)")
    sp.add_argument("--src-pivot", help="source-pivot TSV (mode target)")
    sp.add_argument("--translator", required=True, help="dict:FROM.lang,TO.lang or cmd:COMMAND")
    sp.add_argument("--noise", type=float, default=0.0, help="token drop probability for dict translators")
    sp.add_argument("--substitute", type=float, default=0.0)
    sp.add_argument("--from-lang")
    sp.add_argument("--to-lang")
    sp.add_argument("--src-lang", default="src")
    sp.add_argument("--tgt-lang", default="tgt")
    sp.add_argument("--timeout", type=float, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--filter", action="store_true", help="run the default filter chain on the output")
    sp.add_argument("--out", required=True)

    sp = add("align", cmd_align, "combine bitexts that share a target language")
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--langs", nargs="+", required=True)
    sp.add_argument("--tgt-lang", required=True)
    sp.add_argument("--mode", choices=["by-target", "disjoint"], default="disjoint")
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "train a multi-source model on a multi-way TSV")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--dev")
    sp.add_argument("--out", required=True)
    sp.add_argument("--log")
    sp.add_argument("--emb", type=int, default=32)
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--layers", type=int, default=1)
    sp.add_argument("--src-vocab", type=int, default=None)
    sp.add_argument("--tgt-vocab", type=int, default=None)
    sp.add_argument("--lr", type=float, default=1.0)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--clip", type=float, default=5.0)
    sp.add_argument("--batch-size", type=int, default=4)
    sp.add_argument("--decay", type=float, default=0.5)
    sp.add_argument("--decay-start", type=int, default=10)
    sp.add_argument("--decay-every", type=int, default=10)
    sp.add_argument("--no-bridge", action="store_true")

    sp = add("translate", cmd_translate, "greedy translation with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--inputs", nargs="+", required=True)
    sp.add_argument("--langs", nargs="+", required=True)
    sp.add_argument("--max-len", type=int, default=100)
    sp.add_argument("--chunk", type=int, default=64)
    sp.add_argument("--out", default="-")

    sp = add("evaluate", cmd_evaluate, "corpus BLEU-4 of a hypothesis file against a reference file")
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--format", choices=["tsv", "json"], default="tsv")
    sp.add_argument("--smooth", action="store_true")
    sp.add_argument("--lowercase", action="store_true")
    sp.add_argument("--suffixes", help="comma-separated suffixes split off before scoring")

    sp = add("experiment", cmd_experiment, "run the five-model toy experiment")
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    return p


def exit_code(exc: BaseException) -> int:
    from .experiment import StageError

    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, DivergenceError):
        return 3
    if isinstance(exc, ConfigError):
        return 1
    if isinstance(exc, (DataError, PivotMTError)):
        return 2
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PivotMTError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"ConfigParse: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
