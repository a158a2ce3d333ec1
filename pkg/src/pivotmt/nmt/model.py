"""Multi-source attentional encoder-decoder in numpy, float64.

Every source language has its own embedding table, bidirectional LSTM stack
and bilinear attention matrix. A single decoder attends to each available
source separately; the decoder state and all contexts are concatenated and
squashed through ``tanh(u @ W_comb)`` before the output projection. A source
that is missing for a row contributes a zero context.

Gradients are computed by hand (reverse mode through the cached forward
pass) and checked against central finite differences in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import (
    AllPositionsMasked,
    DimensionMismatch,
    EmptyTargetError,
    NonFiniteLoss,
    NoSourceProvided,
)
from .vocab import BOS, EOS, PAD, Vocabulary

DTYPE = np.float64


@dataclass(frozen=True)
class Hyperparams:
    emb_dim: int = 500
    hidden_dim: int = 1000
    enc_layers: int = 4
    vocab_size_src: tuple[int, ...] = (8000,)
    vocab_size_tgt: int = 10000
    learning_rate: float = 1.0
    epochs: int = 20
    grad_clip_norm: float = 5.0
    seed: int = 0
    batch_size: int = 64
    dec_layers: Optional[int] = None
    init_scale: float = 0.1
    bridge: bool = True

    def __post_init__(self):
        if isinstance(self.vocab_size_src, int):
            object.__setattr__(self, "vocab_size_src", (self.vocab_size_src,))
        else:
            object.__setattr__(self, "vocab_size_src", tuple(int(v) for v in self.vocab_size_src))
        counts = [self.emb_dim, self.hidden_dim, self.enc_layers, self.vocab_size_tgt, self.batch_size]
        counts += list(self.vocab_size_src)
        if self.dec_layers is not None:
            counts.append(self.dec_layers)
        if any(c < 1 for c in counts):
            raise ValueError("all size hyperparameters must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even: encoder directions are hidden_dim/2 wide")
        if self.learning_rate <= 0 or self.grad_clip_norm <= 0:
            raise ValueError("learning_rate and grad_clip_norm must be positive")
        if self.bridge and self.n_dec_layers > self.enc_layers:
            raise ValueError("bridge needs at least as many encoder layers as decoder layers")

    @property
    def n_sources(self) -> int:
        return len(self.vocab_size_src)

    @property
    def n_dec_layers(self) -> int:
        return self.dec_layers if self.dec_layers is not None else self.enc_layers


def param_shapes(hp: Hyperparams) -> list[tuple[str, tuple[int, ...]]]:
    E, H, h2 = hp.emb_dim, hp.hidden_dim, hp.hidden_dim // 2
    shapes = []
    for l, V in enumerate(hp.vocab_size_src):
        shapes.append((f"src{l}.emb", (V, E)))
        for k in range(hp.enc_layers):
            n_in = E if k == 0 else H
            for d in ("fwd", "bwd"):
                shapes.append((f"src{l}.enc{k}.{d}.W", (n_in + h2, 4 * h2)))
                shapes.append((f"src{l}.enc{k}.{d}.b", (4 * h2,)))
        shapes.append((f"src{l}.attn", (H, H)))
    shapes.append(("tgt.emb", (hp.vocab_size_tgt, E)))
    for k in range(hp.n_dec_layers):
        n_in = E if k == 0 else H
        shapes.append((f"dec{k}.W", (n_in + H, 4 * H)))
        shapes.append((f"dec{k}.b", (4 * H,)))
    shapes.append(("comb", ((1 + hp.n_sources) * H, H)))
    shapes.append(("out.W", (H, hp.vocab_size_tgt)))
    shapes.append(("out.b", (hp.vocab_size_tgt,)))
    return shapes


@dataclass
class MsnmtModel:
    hp: Hyperparams
    params: dict[str, np.ndarray]
    src_vocabs: Optional[list[Vocabulary]] = None
    tgt_vocab: Optional[Vocabulary] = None
    source_langs: Optional[list[str]] = None
    tgt_lang: Optional[str] = None

    @property
    def n_sources(self) -> int:
        return self.hp.n_sources

    def copy(self) -> "MsnmtModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


def init_model(hp: Hyperparams, n_sources: Optional[int] = None, **vocab_info) -> MsnmtModel:
    """Uniform(-init_scale, init_scale) parameters, deterministic in ``hp.seed``.

    ``n_sources`` broadcasts a single source vocabulary size to that many
    encoders; otherwise it must agree with ``hp.vocab_size_src``.
    """
    if n_sources is not None:
        if n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if len(hp.vocab_size_src) == 1 and n_sources > 1:
            hp = replace(hp, vocab_size_src=hp.vocab_size_src * n_sources)
        elif len(hp.vocab_size_src) != n_sources:
            raise DimensionMismatch(
                f"{n_sources} sources but {len(hp.vocab_size_src)} source vocabulary sizes"
            )
    rng = np.random.default_rng(hp.seed)
    s = hp.init_scale
    params = {name: rng.uniform(-s, s, size=shape).astype(DTYPE) for name, shape in param_shapes(hp)}
    return MsnmtModel(hp, params, **vocab_info)


# -- batches -----------------------------------------------------------------

@dataclass
class TrainingBatch:
    src: list[np.ndarray]          # per language (B, T_l) ids, PAD where absent
    src_len: list[np.ndarray]      # per language (B,), 0 where unavailable
    avail: np.ndarray              # (B, N) bool
    tgt_in: Optional[np.ndarray] = None   # (B, Ty): BOS y1 .. yn PAD..
    tgt_out: Optional[np.ndarray] = None  # (B, Ty): y1 .. yn EOS PAD..
    tgt_mask: Optional[np.ndarray] = None  # (B, Ty) float

    @property
    def size(self) -> int:
        return self.avail.shape[0]

    def src_mask(self, l: int) -> np.ndarray:
        T = self.src[l].shape[1]
        return np.arange(T)[None, :] < self.src_len[l][:, None]


def make_batch(
    sources: Sequence[Sequence[Optional[Sequence[int]]]],
    targets: Optional[Sequence[Sequence[int]]] = None,
    n_sources: Optional[int] = None,
) -> TrainingBatch:
    """Pad id sequences into a batch; ``sources[r][l]`` is ``None`` when unavailable."""
    B = len(sources)
    N = n_sources if n_sources is not None else len(sources[0])
    avail = np.zeros((B, N), dtype=bool)
    src, src_len = [], []
    for l in range(N):
        lens = np.zeros(B, dtype=np.int64)
        for r, row in enumerate(sources):
            if len(row) != N:
                raise DimensionMismatch(f"row {r} has {len(row)} sources, expected {N}")
            if row[l] is not None and len(row[l]) > 0:
                lens[r] = len(row[l])
                avail[r, l] = True
        X = np.full((B, max(1, int(lens.max()) if B else 1)), PAD, dtype=np.int64)
        for r, row in enumerate(sources):
            if avail[r, l]:
                X[r, : lens[r]] = row[l]
        src.append(X)
        src_len.append(lens)
    for r in range(B):
        if not avail[r].any():
            raise NoSourceProvided(f"row {r} has no available source")
    batch = TrainingBatch(src, src_len, avail)
    if targets is not None:
        if len(targets) != B:
            raise DimensionMismatch("targets and sources differ in row count")
        Ty = max(len(y) for y in targets) + 1
        tin = np.full((B, Ty), PAD, dtype=np.int64)
        tout = np.full((B, Ty), PAD, dtype=np.int64)
        mask = np.zeros((B, Ty), dtype=DTYPE)
        for r, y in enumerate(targets):
            n = len(y)
            tin[r, 0] = BOS
            tin[r, 1 : n + 1] = y
            tout[r, :n] = y
            tout[r, n] = EOS
            mask[r, : n + 1] = 1.0
        batch.tgt_in, batch.tgt_out, batch.tgt_mask = tin, tout, mask
    return batch


# -- primitives --------------------------------------------------------------

def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_step(x, h, c, W, b, m=None):
    """One LSTM step; rows where ``m`` is False keep their previous state."""
    n = h.shape[1]
    xh = np.concatenate([x, h], axis=1)
    z = xh @ W + b
    i = sigmoid(z[:, :n])
    f = sigmoid(z[:, n : 2 * n])
    o = sigmoid(z[:, 2 * n : 3 * n])
    g = np.tanh(z[:, 3 * n :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    if m is not None:
        h_new = np.where(m, h_new, h)
        c_new = np.where(m, c_new, c)
    return h_new, c_new, (xh, i, f, o, g, c, tc, m)


def lstm_step_backward(dh, dc, cache, W, gW, gb):
    xh, i, f, o, g, c, tc, m = cache
    if m is not None:
        dh_keep = np.where(m, 0.0, dh)
        dc_keep = np.where(m, 0.0, dc)
        dh = np.where(m, dh, 0.0)
        dc = np.where(m, dc, 0.0)
    dct = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [dct * g * i * (1.0 - i), dct * c * f * (1.0 - f), dh * tc * o * (1.0 - o), dct * i * (1.0 - g * g)],
        axis=1,
    )
    gW += xh.T @ dz
    gb += dz.sum(axis=0)
    dxh = dz @ W.T
    n_in = xh.shape[1] - dh.shape[1]
    dx, dh_prev, dc_prev = dxh[:, :n_in], dxh[:, n_in:], dct * f
    if m is not None:
        dh_prev = dh_prev + dh_keep
        dc_prev = dc_prev + dc_keep
    return dx, dh_prev, dc_prev


def _masked_softmax(scores, mask):
    """Softmax over the last axis; fully masked rows give all-zero weights."""
    s = np.where(mask, scores, -np.inf)
    mx = np.max(s, axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(s - mx)
    z = e.sum(axis=-1, keepdims=True)
    return np.divide(e, z, out=np.zeros_like(e), where=z > 0)


def _attend(Q, S, M):
    """Q (B, Ty, H), S (B, T, H), M (B, T) -> context (B, Ty, H), weights (B, Ty, T)."""
    scores = Q @ S.transpose(0, 2, 1)
    alpha = _masked_softmax(scores, M[:, None, :])
    return alpha @ S, alpha


def global_attention(decoder_state, encoder_states, attn_matrix, mask=None):
    """Bilinear ("general") global attention for one decoder step.

    ``decoder_state`` is (H,) or (B, H); ``encoder_states`` is (T, H) or
    (B, T, H). Returns the context and the attention weights.
    """
    single = np.ndim(decoder_state) == 1
    h = np.atleast_2d(np.asarray(decoder_state, dtype=DTYPE))
    S = np.asarray(encoder_states, dtype=DTYPE)
    if S.ndim == 2:
        S = S[None]
    B, T, H = S.shape
    if h.shape != (B, H) or attn_matrix.shape != (H, H):
        raise DimensionMismatch(f"decoder {h.shape}, encoder {S.shape}, attention {attn_matrix.shape}")
    M = np.ones((B, T), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(B, T)
    if not M.any(axis=1).all():
        raise AllPositionsMasked("every encoder position is masked")
    ctx, alpha = _attend((h @ attn_matrix)[:, None, :], S, M)
    ctx, alpha = ctx[:, 0], alpha[:, 0]
    return (ctx[0], alpha[0]) if single else (ctx, alpha)


# -- forward / backward ------------------------------------------------------

def _encode(model: MsnmtModel, batch: TrainingBatch, l: int):
    hp, P = model.hp, model.params
    X = batch.src[l]
    B, T = X.shape
    M = batch.src_mask(l) & batch.avail[:, l][:, None]
    h2 = hp.hidden_dim // 2
    inp = P[f"src{l}.emb"][X]
    caches = []
    finals = []
    for k in range(hp.enc_layers):
        out = np.empty((B, T, 2 * h2), dtype=DTYPE)
        layer_cache = {}
        hf, cf = [], []
        for d, order, sl in (("fwd", range(T), slice(0, h2)), ("bwd", range(T - 1, -1, -1), slice(h2, 2 * h2))):
            W, b = P[f"src{l}.enc{k}.{d}.W"], P[f"src{l}.enc{k}.{d}.b"]
            h = np.zeros((B, h2), dtype=DTYPE)
            c = np.zeros((B, h2), dtype=DTYPE)
            steps = {}
            for t in order:
                h, c, steps[t] = lstm_step(inp[:, t], h, c, W, b, M[:, t : t + 1])
                out[:, t, sl] = h
            layer_cache[d] = steps
            hf.append(h)
            cf.append(c)
        caches.append((inp, layer_cache))
        finals.append((np.concatenate(hf, axis=1), np.concatenate(cf, axis=1)))
        inp = out
    return inp, M, caches, finals


def _encode_backward(model, grads, batch, l, d_states, caches, d_finals=None):
    hp, P = model.hp, model.params
    h2 = hp.hidden_dim // 2
    d = d_states
    for k in range(hp.enc_layers - 1, -1, -1):
        inp, layer_cache = caches[k]
        B, T, _ = inp.shape
        d_inp = np.zeros_like(inp)
        for dname, order, sl in (("fwd", range(T - 1, -1, -1), slice(0, h2)), ("bwd", range(T), slice(h2, 2 * h2))):
            W = P[f"src{l}.enc{k}.{dname}.W"]
            gW, gb = grads[f"src{l}.enc{k}.{dname}.W"], grads[f"src{l}.enc{k}.{dname}.b"]
            if d_finals is not None and d_finals[k] is not None:
                dh = d_finals[k][0][:, sl].copy()
                dc = d_finals[k][1][:, sl].copy()
            else:
                dh = np.zeros((B, h2), dtype=DTYPE)
                dc = np.zeros((B, h2), dtype=DTYPE)
            steps = layer_cache[dname]
            for t in order:
                dx, dh, dc = lstm_step_backward(d[:, t, sl] + dh, dc, steps[t], W, gW, gb)
                d_inp[:, t] += dx
        d = d_inp
    X = batch.src[l]
    np.add.at(grads[f"src{l}.emb"], X.reshape(-1), d.reshape(-1, d.shape[-1]))


def encode(model: MsnmtModel, batch: TrainingBatch, lang_index: int):
    """Encoder states (B, T, H) and the position mask (B, T) for one source language."""
    if not 0 <= lang_index < model.n_sources:
        raise DimensionMismatch(f"lang_index {lang_index} out of range for {model.n_sources} sources")
    states, mask, _, _ = _encode(model, batch, lang_index)
    return states, mask


def bridge_state(model: MsnmtModel, finals_per_source) -> "DecoderState":
    """Decoder initial state: encoder final states summed over sources.

    Layer ``k`` of the decoder starts from the concatenated forward/backward
    final states of encoder layer ``k``; unavailable sources hold zeros and
    so add nothing.
    """
    L = model.hp.n_dec_layers
    hs = [sum(f[k][0] for f in finals_per_source) for k in range(L)]
    cs = [sum(f[k][1] for f in finals_per_source) for k in range(L)]
    return DecoderState(hs, cs)


def _decoder_run(model, tgt_in, state=None):
    """Teacher-forced decoder LSTM stack; top-layer states (B, Ty, H)."""
    hp, P = model.hp, model.params
    B, Ty = tgt_in.shape
    L = hp.n_dec_layers
    x_seq = P["tgt.emb"][tgt_in]
    state = state or initial_state(model, B)
    hs, cs = list(state.h), list(state.c)
    top = np.empty((B, Ty, hp.hidden_dim), dtype=DTYPE)
    caches = []
    for t in range(Ty):
        x = x_seq[:, t]
        step = []
        for k in range(L):
            hs[k], cs[k], cache = lstm_step(x, hs[k], cs[k], P[f"dec{k}.W"], P[f"dec{k}.b"])
            step.append(cache)
            x = hs[k]
        top[:, t] = x
        caches.append(step)
    return top, caches


def _combine(model, Hs, enc):
    """Attention per source, fusion and output logits for all decoder steps."""
    P = model.params
    ctxs, alphas, Qs = [], [], []
    for l, (S, M) in enumerate(enc):
        Q = Hs @ P[f"src{l}.attn"]
        ctx, alpha = _attend(Q, S, M)
        ctxs.append(ctx)
        alphas.append(alpha)
        Qs.append(Q)
    u = np.concatenate([Hs] + ctxs, axis=-1)
    comb = np.tanh(u @ P["comb"])
    logits = comb @ P["out.W"] + P["out.b"]
    return logits, (u, comb, alphas, Qs)


def _log_softmax(logits):
    mx = logits.max(axis=-1, keepdims=True)
    z = logits - mx
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _start_state(model, enc_full, B):
    if model.hp.bridge:
        return bridge_state(model, [e[3] for e in enc_full])
    return initial_state(model, B)


def forward_logits(model: MsnmtModel, batch: TrainingBatch) -> np.ndarray:
    """Teacher-forced logits (B, Ty, V)."""
    enc_full = [_encode(model, batch, l) for l in range(model.n_sources)]
    Hs, _ = _decoder_run(model, batch.tgt_in, _start_state(model, enc_full, batch.size))
    return _combine(model, Hs, [e[:2] for e in enc_full])[0]


def _token_loss(logp, batch):
    ntok = batch.tgt_mask.sum()
    if ntok == 0:
        raise EmptyTargetError("batch has no target tokens")
    picked = np.take_along_axis(logp, batch.tgt_out[..., None], axis=-1)[..., 0]
    return -(picked * batch.tgt_mask).sum() / ntok, ntok


def loss(model: MsnmtModel, batch: TrainingBatch) -> float:
    logits = forward_logits(model, batch)
    value, _ = _token_loss(_log_softmax(logits), batch)
    return float(value)


def loss_and_gradients(model: MsnmtModel, batch: TrainingBatch):
    """Mean cross-entropy per target token and its gradient for every parameter."""
    hp, P = model.hp, model.params
    H = hp.hidden_dim
    N = model.n_sources
    enc_full = [_encode(model, batch, l) for l in range(N)]
    enc = [e[:2] for e in enc_full]
    Hs, dec_caches = _decoder_run(model, batch.tgt_in, _start_state(model, enc_full, batch.size))
    logits, (u, comb, alphas, Qs) = _combine(model, Hs, enc)
    logp = _log_softmax(logits)
    value, ntok = _token_loss(logp, batch)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss is {value}")

    grads = model.zeros_like()
    B, Ty, V = logits.shape

    dlogits = np.exp(logp)
    np.put_along_axis(
        dlogits,
        batch.tgt_out[..., None],
        np.take_along_axis(dlogits, batch.tgt_out[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    dlogits *= (batch.tgt_mask / ntok)[..., None]
    flat_comb = comb.reshape(-1, H)
    grads["out.W"] += flat_comb.T @ dlogits.reshape(-1, V)
    grads["out.b"] += dlogits.reshape(-1, V).sum(axis=0)
    dpre = (dlogits @ P["out.W"].T) * (1.0 - comb * comb)
    grads["comb"] += u.reshape(-1, u.shape[-1]).T @ dpre.reshape(-1, H)
    du = dpre @ P["comb"].T
    dHs = du[..., :H].copy()
    dS_all = []
    for l, (S, M) in enumerate(enc):
        dctx = du[..., H * (l + 1) : H * (l + 2)]
        alpha, Q = alphas[l], Qs[l]
        dalpha = dctx @ S.transpose(0, 2, 1)
        dS = alpha.transpose(0, 2, 1) @ dctx
        dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=-1, keepdims=True))
        dQ = dscores @ S
        dS += dscores.transpose(0, 2, 1) @ Q
        grads[f"src{l}.attn"] += Hs.reshape(-1, H).T @ dQ.reshape(-1, H)
        dHs += dQ @ P[f"src{l}.attn"].T
        dS_all.append(dS)

    L = hp.n_dec_layers
    dh = [np.zeros((B, H), dtype=DTYPE) for _ in range(L)]
    dc = [np.zeros((B, H), dtype=DTYPE) for _ in range(L)]
    for t in range(Ty - 1, -1, -1):
        upstream = dHs[:, t]
        for k in range(L - 1, -1, -1):
            upstream, dh[k], dc[k] = lstm_step_backward(
                upstream + dh[k], dc[k], dec_caches[t][k], P[f"dec{k}.W"], grads[f"dec{k}.W"], grads[f"dec{k}.b"]
            )
        np.add.at(grads["tgt.emb"], batch.tgt_in[:, t], upstream)

    # dh/dc now hold the gradient w.r.t. the decoder's initial state
    d_finals = None
    if hp.bridge:
        d_finals = [(dh[k], dc[k]) if k < L else None for k in range(hp.enc_layers)]
    for l in range(N):
        _encode_backward(model, grads, batch, l, dS_all[l], enc_full[l][2], d_finals)
    return float(value), grads


# -- step-wise decoding ------------------------------------------------------

@dataclass
class DecoderState:
    h: list[np.ndarray]
    c: list[np.ndarray]


def initial_state(model: MsnmtModel, batch_size: int) -> DecoderState:
    H, L = model.hp.hidden_dim, model.hp.n_dec_layers
    return DecoderState(
        [np.zeros((batch_size, H), dtype=DTYPE) for _ in range(L)],
        [np.zeros((batch_size, H), dtype=DTYPE) for _ in range(L)],
    )


def decode_step(model: MsnmtModel, prev_ids, state: DecoderState, encoded):
    """One decoder step.

    ``encoded`` holds one ``(states, mask)`` pair per source language as
    returned by :func:`encode`. Returns logits (B, V), the new state and the
    per-source attention weights.
    """
    P = model.params
    if len(encoded) != model.n_sources:
        raise DimensionMismatch(f"{len(encoded)} encoded sources for a {model.n_sources}-source model")
    x = P["tgt.emb"][np.asarray(prev_ids)]
    hs, cs = list(state.h), list(state.c)
    for k in range(model.hp.n_dec_layers):
        hs[k], cs[k], _ = lstm_step(x, hs[k], cs[k], P[f"dec{k}.W"], P[f"dec{k}.b"])
        x = hs[k]
    logits, (_, _, alphas, _) = _combine(model, x[:, None, :], encoded)
    return logits[:, 0], DecoderState(hs, cs), [a[:, 0] for a in alphas]


def translate_batch(model: MsnmtModel, sources, max_len: int) -> list[list[int]]:
    """Greedy decoding for a list of rows of per-language id sequences (or None)."""
    if not sources:
        return []
    for r, row in enumerate(sources):
        if not any(s is not None and len(s) > 0 for s in row):
            raise NoSourceProvided(f"row {r} has no source")
    batch = make_batch(sources, n_sources=model.n_sources)
    B = batch.size
    out = [[] for _ in range(B)]
    if max_len <= 0:
        return out
    enc_full = [_encode(model, batch, l) for l in range(model.n_sources)]
    encoded = [e[:2] for e in enc_full]
    state = _start_state(model, enc_full, B)
    prev = np.full(B, BOS, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    for _ in range(max_len):
        logits, state, _ = decode_step(model, prev, state, encoded)
        prev = logits.argmax(axis=-1)
        for r in np.flatnonzero(~done):
            if prev[r] == EOS:
                done[r] = True
            else:
                out[r].append(int(prev[r]))
        if done.all():
            break
    return out


def translate(model: MsnmtModel, sources: Sequence[Optional[Sequence[int]]], max_len: int) -> list[int]:
    if not any(s is not None and len(s) > 0 for s in sources):
        raise NoSourceProvided("no source sentence given")
    return translate_batch(model, [list(sources)], max_len)[0]
