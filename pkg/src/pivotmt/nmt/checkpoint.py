"""Model checkpoints as a single ``.npz``: a JSON header plus one array per parameter."""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile

import numpy as np

from ..errors import DataError
from .model import Hyperparams, MsnmtModel, param_shapes
from .vocab import Vocabulary

FORMAT = "pivotmt-checkpoint/1"


def save_model(model: MsnmtModel, path) -> None:
    meta = {
        "format": FORMAT,
        "hyperparams": dataclasses.asdict(model.hp),
        "src_vocabs": None if model.src_vocabs is None else [list(v.symbols) for v in model.src_vocabs],
        "tgt_vocab": None if model.tgt_vocab is None else list(model.tgt_vocab.symbols),
        "source_langs": model.source_langs,
        "tgt_lang": model.tgt_lang,
        "param_order": list(model.params),
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> MsnmtModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != FORMAT:
                raise DataError(f"{path}: not a {FORMAT} file")
            hp_fields = dict(meta["hyperparams"])
            hp_fields["vocab_size_src"] = tuple(hp_fields["vocab_size_src"])
            hp = Hyperparams(**hp_fields)
            params = {k: np.array(data[f"param/{k}"]) for k in meta["param_order"]}
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    expected = dict(param_shapes(hp))
    for k, v in params.items():
        if expected.get(k) != v.shape:
            raise DataError(f"{path}: parameter {k} has shape {v.shape}, expected {expected.get(k)}")
    return MsnmtModel(
        hp,
        params,
        src_vocabs=None if meta["src_vocabs"] is None else [Vocabulary(tuple(v)) for v in meta["src_vocabs"]],
        tgt_vocab=None if meta["tgt_vocab"] is None else Vocabulary(tuple(meta["tgt_vocab"])),
        source_langs=meta["source_langs"],
        tgt_lang=meta["tgt_lang"],
    )
