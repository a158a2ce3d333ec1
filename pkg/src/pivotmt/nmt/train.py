from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus import MultiWayCorpus, atomic_write_text
from ..errors import DataError, NonFiniteLoss
from .model import Hyperparams, MsnmtModel, loss, loss_and_gradients, make_batch

log = logging.getLogger(__name__)

# (per-language source ids or None, target ids)
Example = tuple[Sequence[Optional[Sequence[int]]], Sequence[int]]


@dataclass(frozen=True)
class Schedule:
    """Learning rate ``lr0 * decay ** k`` where ``k`` counts elapsed decay periods.

    With the defaults the rate is halved at epoch 10 and again every 10
    epochs after that. Epochs are 1-based.
    """

    decay: float = 0.5
    start_epoch: int = 10
    every: int = 10

    def lr(self, base: float, epoch: int) -> float:
        if epoch < self.start_epoch:
            return base
        return base * self.decay ** ((epoch - self.start_epoch) // self.every + 1)


@dataclass(frozen=True)
class EpochStat:
    epoch: int
    mean_loss: float
    lr: float
    dev_loss: Optional[float] = None


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def sgd_step(model: MsnmtModel, grads: dict[str, np.ndarray], lr: float, clip_norm: float) -> MsnmtModel:
    """Clip the global gradient norm to ``clip_norm`` and take one SGD step."""
    if set(grads) != set(model.params):
        raise DataError("gradient keys do not match model parameters")
    norm = global_norm(grads)
    scale = clip_norm / norm if norm > clip_norm else 1.0
    new = model.copy()
    for k, g in grads.items():
        if g.shape != new.params[k].shape:
            raise DataError(f"gradient shape {g.shape} != parameter shape {new.params[k].shape} for {k}")
        new.params[k] -= (lr * scale) * g
    return new


def corpus_to_examples(model: MsnmtModel, corpus: MultiWayCorpus) -> list[Example]:
    """Map a whitespace-tokenized corpus through the model's vocabularies."""
    if model.src_vocabs is None or model.tgt_vocab is None:
        raise DataError("model has no vocabularies attached")
    langs = list(model.source_langs or corpus.source_langs)
    if list(corpus.source_langs) != langs:
        raise DataError(f"corpus languages {corpus.source_langs} differ from model languages {langs}")
    out = []
    for row in corpus:
        srcs = [None if s is None else v.ids(s.split()) for s, v in zip(row.sources, model.src_vocabs)]
        out.append((srcs, model.tgt_vocab.ids(row.target.split())))
    return out


def batches(examples: Sequence[Example], batch_size: int, n_sources: int, order=None):
    idx = np.arange(len(examples)) if order is None else order
    for start in range(0, len(idx), batch_size):
        chunk = [examples[i] for i in idx[start : start + batch_size]]
        yield make_batch([e[0] for e in chunk], [e[1] for e in chunk], n_sources)


def evaluate_loss(model: MsnmtModel, examples: Sequence[Example], batch_size: int = 64) -> float:
    total = count = 0.0
    for b in batches(examples, batch_size, model.n_sources):
        ntok = b.tgt_mask.sum()
        total += loss(model, b) * ntok
        count += ntok
    return float(total / count)


def write_log(history: Sequence[EpochStat], path) -> None:
    lines = [f"{h.epoch}\t{h.mean_loss!r}\t{h.lr!r}\n" for h in history]
    atomic_write_text(path, "".join(lines))


def train(
    model: MsnmtModel,
    corpus,
    hp: Optional[Hyperparams] = None,
    schedule: Optional[Schedule] = None,
    dev=None,
    log_path=None,
) -> tuple[MsnmtModel, list[EpochStat]]:
    """Seeded mini-batch SGD with per-epoch reshuffling.

    ``corpus`` is a :class:`MultiWayCorpus` of whitespace-tokenized text or a
    list of id-level examples. Returns the trained model and one
    :class:`EpochStat` per epoch.
    """
    hp = hp or model.hp
    schedule = schedule or Schedule()
    examples = corpus_to_examples(model, corpus) if isinstance(corpus, MultiWayCorpus) else list(corpus)
    dev_examples = None
    if dev is not None:
        dev_examples = corpus_to_examples(model, dev) if isinstance(dev, MultiWayCorpus) else list(dev)
    if hp.epochs > 0 and not examples:
        raise DataError("cannot train on an empty corpus")

    rng = np.random.default_rng([hp.seed, 1])
    history = []
    for epoch in range(1, hp.epochs + 1):
        lr = schedule.lr(hp.learning_rate, epoch)
        order = rng.permutation(len(examples))
        total = count = 0.0
        for step, b in enumerate(batches(examples, hp.batch_size, model.n_sources, order)):
            try:
                value, grads = loss_and_gradients(model, b)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(f"{exc} at epoch {epoch}, step {step}", epoch, step) from None
            model = sgd_step(model, grads, lr, hp.grad_clip_norm)
            ntok = b.tgt_mask.sum()
            total += value * ntok
            count += ntok
        dev_loss = evaluate_loss(model, dev_examples, hp.batch_size) if dev_examples else None
        stat = EpochStat(epoch, float(total / count), lr, dev_loss)
        history.append(stat)
        log.info("epoch %d loss %.4f lr %g%s", epoch, stat.mean_loss, lr,
                 "" if dev_loss is None else f" dev {dev_loss:.4f}")
        if log_path is not None:
            write_log(history, log_path)
    return model, history
