import json

import pytest

from pivotmt.cli import main
from pivotmt.config import ExperimentConfig, config_from_dict, load_config
from pivotmt.errors import ConfigParse
from pivotmt.synth import Grammar, generate_toy_multiway, make_toy_language, save_toy_spec


def write(path, lines):
    path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return str(path)


def test_bpe_round_trip(tmp_path, capsys):
    text = write(tmp_path / "a.txt", ["the cat sat", "the cats sat on the mat", "mat cat hat"])
    model = str(tmp_path / "m.bpe")
    assert main(["bpe-train", "--input", text, "--vocab", "20", "--out", model]) == 0
    enc = str(tmp_path / "a.bpe")
    assert main(["bpe-apply", "--model", model, "--input", text, "--out", enc]) == 0
    dec = str(tmp_path / "a.dec")
    assert main(["bpe-decode", "--input", enc, "--out", dec]) == 0
    assert (tmp_path / "a.dec").read_text() == (tmp_path / "a.txt").read_text()


def test_evaluate_identity(tmp_path, capsys):
    h = write(tmp_path / "h.txt", ["a b c d e", "f g h i"])
    assert main(["evaluate", "--hyp", h, "--ref", h]) == 0
    assert "bleu_pct\t100.00" in capsys.readouterr().out
    assert main(["evaluate", "--hyp", h, "--ref", h, "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["bleu_pct"] == "100.00"


def test_synth_source_keeps_target_file_column(tmp_path):
    en = make_toy_language("en", 20, "abcdef", 1)
    ko = make_toy_language("ko", 20, "가나다라", 2, grammar=Grammar.REVERSED)
    ar = make_toy_language("ar", 20, "ابتث", 3)
    save_toy_spec(en, tmp_path / "en.lang")
    save_toy_spec(ko, tmp_path / "ko.lang")
    mw = generate_toy_multiway([en], ar, 30, 4)
    src = write(tmp_path / "en_ar.tsv", [f"{r.sources[0]}\t{r.target}" for r in mw])
    out = tmp_path / "syn.tsv"
    rc = main(["synth", "--mode", "source", "--pivot-tgt", src, "--tgt-lang", "ar",
               "--translator", f"dict:{tmp_path / 'en.lang'},{tmp_path / 'ko.lang'}", "--out", str(out)])
    assert rc == 0
    got = [l.split("\t")[1] for l in out.read_text(encoding="utf-8").splitlines()]
    want = [l.split("\t")[1] for l in (tmp_path / "en_ar.tsv").read_text(encoding="utf-8").splitlines()]
    assert got == want


def test_align_train_translate(tmp_path):
    a = write(tmp_path / "a.tsv", [f"x{i % 4} y\tu{i % 4} v" for i in range(12)])
    b = write(tmp_path / "b.tsv", [f"p{i % 3}\tu{i % 3} v" for i in range(9)])
    mw = str(tmp_path / "mw.tsv")
    assert main(["align", "--inputs", a, b, "--langs", "a", "b", "--tgt-lang", "t", "--out", mw]) == 0
    model = str(tmp_path / "m.npz")
    assert main(["train", "--corpus", mw, "--out", model, "--emb", "4", "--hidden", "6", "--epochs", "2",
                 "--seed", "1", "--log", str(tmp_path / "log.tsv")]) == 0
    assert len((tmp_path / "log.tsv").read_text().splitlines()) == 2
    src = write(tmp_path / "src.txt", ["x1 y", "x2 y"])
    out = tmp_path / "hyp.txt"
    assert main(["translate", "--model", model, "--inputs", src, "--langs", "a", "--max-len", "5",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_codes(tmp_path, capsys):
    assert main(["experiment", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1
    assert "ConfigParse" in capsys.readouterr().err
    h = write(tmp_path / "h.txt", ["a"])
    r = write(tmp_path / "r.txt", ["a", "b"])
    assert main(["evaluate", "--hyp", h, "--ref", r]) == 2
    assert "LengthMismatch" in capsys.readouterr().err
    mw = write(tmp_path / "mw.tsv", ["a\tt", "x y\tu v", "x\tu"])
    rc = main(["train", "--corpus", mw, "--out", str(tmp_path / "m.npz"), "--emb", "4", "--hidden", "4",
               "--epochs", "3", "--batch-size", "1", "--lr", "1e308", "--clip", "1e308"])
    assert rc == 3
    assert "NonFiniteLoss" in capsys.readouterr().err
    with pytest.raises(SystemExit) as ei:
        main(["no-such-command"])
    assert ei.value.code == 1


def test_seed_from_environment(tmp_path, monkeypatch):
    mw = write(tmp_path / "mw.tsv", ["a\tt", "x y\tu v", "x\tu"])
    args = ["train", "--corpus", mw, "--emb", "4", "--hidden", "4", "--epochs", "1"]
    monkeypatch.setenv("PIVOTMT_SEED", "5")
    main(args + ["--out", str(tmp_path / "env.npz")])
    main(args + ["--out", str(tmp_path / "flag.npz"), "--seed", "5"])
    main(args + ["--out", str(tmp_path / "other.npz"), "--seed", "6"])
    from pivotmt.nmt import load_model

    env, flag, other = (load_model(tmp_path / f"{n}.npz") for n in ("env", "flag", "other"))
    assert env.hp.seed == flag.hp.seed == 5 and other.hp.seed == 6


def test_config_defaults_and_yaml(tmp_path):
    cfg = ExperimentConfig()
    assert cfg.sizes.baseline == 150_000 and cfg.sizes.synthetic_total == 600_000
    assert cfg.bpe.src_vocab == 8_000 and cfg.bpe.tgt_vocab == 10_000
    assert (cfg.model.emb_dim, cfg.model.hidden_dim, cfg.model.layers) == (500, 1000, 4)
    p = tmp_path / "c.yaml"
    p.write_text("sizes: {baseline: 10, prod_pool: 20, msm_extra: 10, synthetic_total: 30,\n"
                 "  combined_per_lang: 20, wit_pool: 40}\nmodel: {learning_rate: 1}\n")
    c = load_config(p)
    assert c.sizes.baseline == 10 and c.model.learning_rate == 1.0


@pytest.mark.parametrize("data", [
    {"sizes": {"nope": 1}},
    {"sizes": {"baseline": "ten"}},
    {"sizes": {"baseline": 10**9}},
    {"domains": {"trip": {"concepts": [0, 999], "length": [1, 2]}}},
    {"variants": [7]},
])
def test_config_rejects_bad_values(data):
    with pytest.raises(ConfigParse):
        config_from_dict(data)
