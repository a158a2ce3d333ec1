"""Experiment configuration.

Defaults are the full-scale settings (corpus sizes of the five-model matrix,
8K/10K BPE, 4x1000 LSTMs, SGD at lr 1 for 20 epochs). The shipped
``configs/toy.yaml`` overrides them with desk-scale values.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .errors import ConfigParse
from .nmt.model import Hyperparams
from .nmt.train import Schedule


@dataclass
class LanguageConfig:
    alphabet: str
    grammar: str = "identity"
    suffixes: list[str] = field(default_factory=list)
    stem_len: tuple[int, int] = (2, 4)
    spec_file: Optional[str] = None  # load a fixed lexicon instead of generating one


@dataclass
class DomainConfig:
    concepts: tuple[int, int]  # half-open id range [lo, hi)
    length: tuple[int, int]

    @property
    def pool(self) -> list[int]:
        return list(range(*self.concepts))


@dataclass
class RolesConfig:
    source: str = "ko"
    pivot: str = "en"
    target: str = "ar"
    extra_sources: list[str] = field(default_factory=lambda: ["en", "ja", "zh"])


@dataclass
class SizesConfig:
    prod_pool: int = 157_865
    baseline: int = 150_000
    msm_extra: int = 150_000
    synthetic_total: int = 600_000
    combined_per_lang: int = 500_000
    src_pivot_pool: int = 2_500_000
    pivot_tgt_pool: int = 11_000_000
    wit_pool: int = 508_925
    dev: int = 3_865
    trip_test: int = 4_000
    ted_test: int = 2_000


@dataclass
class NoiseConfig:
    pivot_to_target: float = 0.3
    pivot_to_source: float = 0.0
    substitute: float = 0.0


@dataclass
class FilterSettings:
    min_len: int = 1
    max_len: int = 100
    max_ratio: float = 3.0
    unk_symbol: str = "<unk>"


@dataclass
class BpeConfig:
    src_vocab: int = 8_000
    tgt_vocab: int = 10_000


@dataclass
class ModelConfig:
    emb_dim: int = 500
    hidden_dim: int = 1_000
    layers: int = 4
    learning_rate: float = 1.0
    epochs: int = 20
    grad_clip_norm: float = 5.0
    batch_size: int = 64
    lr_decay: float = 0.5
    decay_start: int = 10
    decay_every: int = 10
    bridge: bool = True
    max_decode_len: int = 100

    def hyperparams(self, vocab_src, vocab_tgt, seed) -> Hyperparams:
        return Hyperparams(
            emb_dim=self.emb_dim,
            hidden_dim=self.hidden_dim,
            enc_layers=self.layers,
            vocab_size_src=tuple(vocab_src),
            vocab_size_tgt=vocab_tgt,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            grad_clip_norm=self.grad_clip_norm,
            seed=seed,
            batch_size=self.batch_size,
            bridge=self.bridge,
        )

    def schedule(self) -> Schedule:
        return Schedule(self.lr_decay, self.decay_start, self.decay_every)


def _default_languages():
    return {
        "ko": LanguageConfig("가나다라마바사아자차카타파하거너더러모보소", "reversed"),
        "en": LanguageConfig("abcdefghiklmnoprstuvw", "identity"),
        "ja": LanguageConfig("あいうえおかきくけこさしすせそたちつてと", "reversed"),
        "zh": LanguageConfig("的一是不了人我在有他这中大来上国个到说们", "identity"),
        "ar": LanguageConfig("ابتثجحخدذرزسشصضطظعغف", "identity", ["ها", "ات", "ون"]),
    }


def _default_domains():
    return {
        "trip": DomainConfig((0, 32), (3, 6)),
        "ted": DomainConfig((16, 48), (4, 8)),
        "general": DomainConfig((0, 48), (3, 8)),
    }


@dataclass
class ExperimentConfig:
    seed: int = 1234
    n_concepts: int = 48
    languages: dict[str, LanguageConfig] = field(default_factory=_default_languages)
    roles: RolesConfig = field(default_factory=RolesConfig)
    domains: dict[str, DomainConfig] = field(default_factory=_default_domains)
    sizes: SizesConfig = field(default_factory=SizesConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    filter: FilterSettings = field(default_factory=FilterSettings)
    bpe: BpeConfig = field(default_factory=BpeConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    variants: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])

    def validate(self) -> "ExperimentConfig":
        s = self.sizes
        r = self.roles
        for lang in {r.source, r.pivot, r.target, *r.extra_sources}:
            if lang not in self.languages:
                raise ConfigParse(f"role language {lang!r} has no entry under 'languages'")
        if r.source in r.extra_sources or r.target in r.extra_sources:
            raise ConfigParse("extra_sources must not repeat the source or target language")
        for name in ("trip", "ted", "general"):
            if name not in self.domains:
                raise ConfigParse(f"missing domain {name!r}")
            d = self.domains[name]
            if not (0 <= d.concepts[0] < d.concepts[1] <= self.n_concepts):
                raise ConfigParse(f"domain {name}: concept range {d.concepts} outside [0, {self.n_concepts})")
            if not 1 <= d.length[0] <= d.length[1]:
                raise ConfigParse(f"domain {name}: bad length range {d.length}")
        if s.baseline > s.prod_pool:
            raise ConfigParse("sizes.baseline exceeds sizes.prod_pool")
        if s.synthetic_total < s.baseline or s.combined_per_lang < s.baseline:
            raise ConfigParse("extended corpus sizes must be at least the baseline size")
        if max(s.msm_extra, s.combined_per_lang) > s.wit_pool:
            raise ConfigParse("sizes.wit_pool is smaller than the multi-source corpus sizes")
        if not set(self.variants) <= {1, 2, 3, 4, 5}:
            raise ConfigParse(f"unknown variants {self.variants}")
        for p in (self.noise.pivot_to_target, self.noise.pivot_to_source, self.noise.substitute):
            if not 0 <= p <= 1:
                raise ConfigParse("noise levels must lie in [0, 1]")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, path="config"):
    if dataclasses.is_dataclass(cls):
        if not isinstance(data, dict):
            raise ConfigParse(f"{path}: expected a mapping")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(names)
        if unknown:
            raise ConfigParse(f"{path}: unknown keys {sorted(unknown)}")
        kwargs = {}
        hints = _hints(cls)
        for k, v in data.items():
            kwargs[k] = _build(hints[k], v, f"{path}.{k}")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigParse(f"{path}: {exc}") from None
    origin = getattr(cls, "__origin__", None)
    args = getattr(cls, "__args__", ())
    if origin is dict:
        if not isinstance(data, dict):
            raise ConfigParse(f"{path}: expected a mapping")
        return {str(k): _build(args[1], v, f"{path}.{k}") for k, v in data.items()}
    if origin is list:
        if not isinstance(data, list):
            raise ConfigParse(f"{path}: expected a list")
        return [_build(args[0], v, f"{path}[{i}]") for i, v in enumerate(data)]
    if origin is tuple:
        if not isinstance(data, (list, tuple)) or len(data) != len(args):
            raise ConfigParse(f"{path}: expected a list of {len(args)} items")
        return tuple(_build(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, data)))
    if origin is not None and type(None) in args:  # Optional[...]
        if data is None:
            return None
        return _build(next(a for a in args if a is not type(None)), data, path)
    if cls is float and isinstance(data, int) and not isinstance(data, bool):
        return float(data)
    if cls in (int, float, str, bool):
        if not isinstance(data, cls) or (cls is int and isinstance(data, bool)):
            raise ConfigParse(f"{path}: expected {cls.__name__}, got {data!r}")
        return data
    return data


def _hints(cls) -> dict[str, Any]:
    import typing

    return typing.get_type_hints(cls)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    return config_from_dict(data)
