"""Toy-scale multi-source attentional seq2seq."""
from .checkpoint import load_model, save_model
from .model import (
    DecoderState,
    Hyperparams,
    MsnmtModel,
    TrainingBatch,
    decode_step,
    encode,
    forward_logits,
    global_attention,
    init_model,
    loss,
    loss_and_gradients,
    make_batch,
    translate,
    translate_batch,
)
from .train import EpochStat, Schedule, corpus_to_examples, evaluate_loss, sgd_step, train, write_log
from .vocab import BOS, EOS, PAD, UNK, Vocabulary

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "UNK",
    "DecoderState",
    "EpochStat",
    "Hyperparams",
    "MsnmtModel",
    "Schedule",
    "TrainingBatch",
    "Vocabulary",
    "corpus_to_examples",
    "decode_step",
    "encode",
    "evaluate_loss",
    "forward_logits",
    "global_attention",
    "init_model",
    "load_model",
    "loss",
    "loss_and_gradients",
    "make_batch",
    "save_model",
    "sgd_step",
    "train",
    "translate",
    "translate_batch",
    "write_log",
]
