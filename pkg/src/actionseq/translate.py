"""Model variants that translate feature sequences into action sequences.

Four variants share one container:

  lstm-mean  mean-pooled features fed to a stacked LSTM at every step
  lstm-ss    stacked LSTM consumes the feature sequence, then free-runs
             on its own output embeddings
  lstm-ed    LSTM encoder-decoder; decoder initialized from the encoder's
             final hidden and cell state
  gru-aa     GRU encoder-decoder with additive attention over encoder
             states and an output projection over [hidden; context;
             previous embedding]

Decoding is always greedy argmax restricted to the class ids plus EOS
(SOS and PAD can never be emitted), ties broken by lowest id, stopping
at EOS or at max_decode_len emitted tokens.

This module also houses the hand-derived backward passes for the decode
steps and encoders; the training module assembles them into full
sequence losses.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .cells import (
    GruCellParams,
    LstmCellParams,
    gru_step_backward,
    gru_step_cached,
    lstm_step_backward,
    lstm_step_cached,
)
from .numkit import softmax

LSTM_MEAN = "lstm-mean"
LSTM_SS = "lstm-ss"
LSTM_ED = "lstm-ed"
GRU_AA = "gru-aa"
VARIANTS = (LSTM_MEAN, LSTM_SS, LSTM_ED, GRU_AA)


@dataclass
class FeatureSequence:
    """T feature vectors of dimension D_in standing in for video-clip features."""

    frames: np.ndarray  # (T, D_in) float64
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError(f"frames must be (T, D_in) with T >= 1, got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature values must be finite")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class AttentionTrace:
    """Alignment weights recorded while decoding: (encoder steps T, decoder steps Q)."""

    weights: np.ndarray


@dataclass
class Prediction:
    tokens: List[int]
    step_scores: np.ndarray          # (Q, n_symbols) raw pre-softmax scores
    attention: Optional[AttentionTrace] = None


@dataclass
class EncoderStates:
    states: np.ndarray               # (T, hidden)
    final_hidden: np.ndarray         # (hidden,)
    final_cell: Optional[np.ndarray] = None  # LSTM encoders only


@dataclass
class Seq2SeqModel:
    variant: str
    n_classes: int
    feature_dim: int
    hidden_dim: int
    embedding_dim: int
    max_decode_len: int
    encoder: Optional[object] = None           # cell params (lstm-ed / gru-aa)
    decoder: Optional[object] = None           # cell params (lstm-ed / gru-aa)
    layers: Optional[List[LstmCellParams]] = None  # stacked cells (baselines)
    w_emb: Optional[np.ndarray] = None         # (n_symbols, embedding_dim)
    w_att: Optional[np.ndarray] = None         # (2*hidden, hidden)
    v_att: Optional[np.ndarray] = None         # (hidden,)
    w_out: np.ndarray = field(default=None)    # projection to n_symbols
    vocab_hash: str = ""

    @property
    def n_symbols(self) -> int:
        return self.n_classes + 3

    @property
    def sos(self) -> int:
        return self.n_classes

    @property
    def eos(self) -> int:
        return self.n_classes + 1

    @property
    def pad(self) -> int:
        return self.n_classes + 2


def build_model(
    variant: str,
    n_classes: int,
    feature_dim: int,
    hidden_dim: int,
    embedding_dim: int,
    rng: np.random.Generator,
    num_layers: int = 2,
    max_decode_len: int = 16,
    vocab_hash: str = "",
) -> Seq2SeqModel:
    """Seeded construction; weights uniform in +/- 1/sqrt(fan), biases zero.

    num_layers applies to the stacked-LSTM baselines only. lstm-ss embeds
    tokens into feature_dim so generated embeddings fit the same input
    slot as the features.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    n_symbols = n_classes + 3

    def uniform(shape, fan):
        s = 1.0 / np.sqrt(fan)
        return rng.uniform(-s, s, shape)

    m = Seq2SeqModel(
        variant=variant,
        n_classes=n_classes,
        feature_dim=feature_dim,
        hidden_dim=hidden_dim,
        embedding_dim=embedding_dim,
        max_decode_len=max_decode_len,
        vocab_hash=vocab_hash,
    )
    if variant == LSTM_ED:
        m.encoder = LstmCellParams.init(feature_dim, hidden_dim, rng)
        m.decoder = LstmCellParams.init(embedding_dim, hidden_dim, rng)
        m.w_emb = uniform((n_symbols, embedding_dim), embedding_dim)
        m.w_out = uniform((hidden_dim, n_symbols), hidden_dim)
    elif variant == GRU_AA:
        m.encoder = GruCellParams.init(feature_dim, hidden_dim, rng)
        m.decoder = GruCellParams.init(embedding_dim + hidden_dim, hidden_dim, rng)
        m.w_emb = uniform((n_symbols, embedding_dim), embedding_dim)
        m.w_att = uniform((2 * hidden_dim, hidden_dim), 2 * hidden_dim)
        m.v_att = uniform((hidden_dim,), hidden_dim)
        m.w_out = uniform((2 * hidden_dim + embedding_dim, n_symbols), 2 * hidden_dim + embedding_dim)
    else:
        if num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        m.layers = [LstmCellParams.init(feature_dim, hidden_dim, rng)]
        for _ in range(num_layers - 1):
            m.layers.append(LstmCellParams.init(hidden_dim, hidden_dim, rng))
        if variant == LSTM_SS:
            m.embedding_dim = feature_dim
            m.w_emb = uniform((n_symbols, feature_dim), feature_dim)
        else:
            m.embedding_dim = 0
        m.w_out = uniform((hidden_dim, n_symbols), hidden_dim)
    return m


# ---------------------------------------------------------------------------
# Parameter bookkeeping (flat vectors for the optimizer and grad checks)
# ---------------------------------------------------------------------------

def param_items(model: Seq2SeqModel) -> List[Tuple[str, np.ndarray]]:
    """Canonical (name, array) order shared by flattening and checkpoints."""
    items: List[Tuple[str, np.ndarray]] = []
    if model.encoder is not None:
        items += [("enc.w_x", model.encoder.w_x), ("enc.w_h", model.encoder.w_h), ("enc.b", model.encoder.b)]
    if model.decoder is not None:
        items += [("dec.w_x", model.decoder.w_x), ("dec.w_h", model.decoder.w_h), ("dec.b", model.decoder.b)]
    if model.layers is not None:
        for i, layer in enumerate(model.layers):
            items += [(f"layers.{i}.w_x", layer.w_x), (f"layers.{i}.w_h", layer.w_h), (f"layers.{i}.b", layer.b)]
    if model.w_emb is not None:
        items.append(("w_emb", model.w_emb))
    if model.w_att is not None:
        items.append(("w_att", model.w_att))
    if model.v_att is not None:
        items.append(("v_att", model.v_att))
    items.append(("w_out", model.w_out))
    return items


def get_flat_params(model: Seq2SeqModel) -> np.ndarray:
    return np.concatenate([arr.ravel() for _, arr in param_items(model)])


def set_flat_params(model: Seq2SeqModel, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    off = 0
    for _, arr in param_items(model):
        n = arr.size
        arr[...] = vec[off:off + n].reshape(arr.shape)
        off += n
    if off != vec.size:
        raise ValueError(f"flat vector has {vec.size} entries, model needs {off}")


def zero_grads(model: Seq2SeqModel) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in param_items(model)}


def flatten_grads(model: Seq2SeqModel, grads: Dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grads[name].ravel() for name, _ in param_items(model)])


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------

def encode(model: Seq2SeqModel, features: FeatureSequence) -> EncoderStates:
    enc, _ = encode_cached(model, features)
    return enc


def encode_cached(model: Seq2SeqModel, features: FeatureSequence):
    """Run the encoder over all frames; also returns per-step caches for BPTT."""
    if model.variant not in (LSTM_ED, GRU_AA):
        raise ValueError(f"variant {model.variant!r} has no encoder; use forward_baseline")
    frames = features.frames
    if frames.shape[1] != model.feature_dim:
        raise ValueError(f"feature dim {frames.shape[1]} does not match model ({model.feature_dim})")
    T = frames.shape[0]
    d = model.hidden_dim
    states = np.empty((T, d))
    caches = []
    h = np.zeros(d)
    if model.variant == GRU_AA:
        for t in range(T):
            h, cache = gru_step_cached(frames[t], h, model.encoder)
            states[t] = h
            caches.append(cache)
        return EncoderStates(states=states, final_hidden=h), caches
    c = np.zeros(d)
    for t in range(T):
        c, h, cache = lstm_step_cached(frames[t], h, c, model.encoder)
        states[t] = h
        caches.append(cache)
    return EncoderStates(states=states, final_hidden=h, final_cell=c), caches


def gru_encoder_backward(model, caches, dstates, dh_final, grads) -> None:
    """BPTT over the GRU encoder.

    dstates: (T, hidden) gradients flowing into each per-step hidden state
    (attention contributions), dh_final: extra gradient on the last state
    (decoder initialization). Parameter gradients accumulate into grads.
    """
    dh = dh_final.copy()
    for t in reversed(range(len(caches))):
        dh = dh + dstates[t]
        g, _, dh = gru_step_backward(model.encoder, caches[t], dh)
        grads["enc.w_x"] += g.w_x
        grads["enc.w_h"] += g.w_h
        grads["enc.b"] += g.b


def lstm_encoder_backward(model, caches, dh_final, dc_final, grads) -> None:
    dh = dh_final.copy()
    dc = dc_final.copy()
    for t in reversed(range(len(caches))):
        g, _, dh, dc = lstm_step_backward(model.encoder, caches[t], dh, dc)
        grads["enc.w_x"] += g.w_x
        grads["enc.w_h"] += g.w_h
        grads["enc.b"] += g.b


# ---------------------------------------------------------------------------
# Additive attention
# ---------------------------------------------------------------------------

def attention(states: np.ndarray, h_dec: np.ndarray, model: Seq2SeqModel) -> np.ndarray:
    """Alignment weights over encoder states for the current decoder state.

    beta_i = tanh([h_i; h_dec] @ w_att) . v_att, alpha = softmax(beta).
    """
    if model.variant != GRU_AA:
        raise ValueError(f"variant {model.variant!r} does not use attention")
    alpha, _ = _attention_forward(states, h_dec, model.w_att, model.v_att)
    return alpha


def _attention_forward(states, h_dec, w_att, v_att):
    T = states.shape[0]
    u = np.concatenate([states, np.tile(h_dec, (T, 1))], axis=1)  # (T, 2*hidden)
    t_mat = np.tanh(u @ w_att)
    beta = t_mat @ v_att
    alpha = softmax(beta)
    return alpha, (states, u, t_mat, alpha)


def _attention_backward(w_att, v_att, cache, dalpha):
    states, u, t_mat, alpha = cache
    d = states.shape[1]
    dbeta = alpha * (dalpha - np.dot(alpha, dalpha))   # softmax jacobian
    dt = np.outer(dbeta, v_att)
    dv = t_mat.T @ dbeta
    da = dt * (1.0 - t_mat * t_mat)
    dw_att = u.T @ da
    du = da @ w_att.T
    return dw_att, dv, du[:, :d], du[:, d:].sum(axis=0)


def context_vector(states: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Attention-weighted sum of encoder hidden states."""
    if states.shape[0] != alpha.shape[0]:
        raise ValueError(f"{alpha.shape[0]} weights for {states.shape[0]} states")
    return alpha @ states


# ---------------------------------------------------------------------------
# Decode steps (shared by greedy decoding, training, and captioning)
# ---------------------------------------------------------------------------

def gruaa_step_cached(model, states, h_prev, emb_prev):
    """One attention decoder step: returns (h, scores, alpha, cache)."""
    alpha, att_cache = _attention_forward(states, h_prev, model.w_att, model.v_att)
    ctx = alpha @ states
    x_dec = np.concatenate([emb_prev, ctx])
    h, gru_cache = gru_step_cached(x_dec, h_prev, model.decoder)
    proj_in = np.concatenate([h, ctx, emb_prev])
    scores = proj_in @ model.w_out
    return h, scores, alpha, (att_cache, alpha, gru_cache, proj_in)


def gruaa_step_backward(model, cache, dscores, dh, grads, dstates):
    """Backward through one attention decoder step.

    dh is the gradient w.r.t. this step's hidden state arriving from later
    steps. Accumulates parameter gradients into grads and encoder-state
    gradients into dstates; returns (dh_prev, demb) for the previous
    decoder state and the embedded input token.
    """
    att_cache, alpha, gru_cache, proj_in = cache
    d = model.hidden_dim
    e = model.embedding_dim
    grads["w_out"] += np.outer(proj_in, dscores)
    dproj = model.w_out @ dscores
    dh = dh + dproj[:d]
    dctx = dproj[d:2 * d].copy()
    demb = dproj[2 * d:].copy()
    g, dx_dec, dh_prev = gru_step_backward(model.decoder, gru_cache, dh)
    grads["dec.w_x"] += g.w_x
    grads["dec.w_h"] += g.w_h
    grads["dec.b"] += g.b
    demb += dx_dec[:e]
    dctx += dx_dec[e:]
    states = att_cache[0]
    dalpha = states @ dctx
    dstates += np.outer(alpha, dctx)
    dw_att, dv, dstates_att, dh_dec = _attention_backward(model.w_att, model.v_att, att_cache, dalpha)
    grads["w_att"] += dw_att
    grads["v_att"] += dv
    dstates += dstates_att
    dh_prev = dh_prev + dh_dec
    return dh_prev, demb


def lstmed_step_cached(model, h_prev, c_prev, emb_prev):
    c, h, lstm_cache = lstm_step_cached(emb_prev, h_prev, c_prev, model.decoder)
    scores = h @ model.w_out
    return c, h, scores, (lstm_cache, h)


def lstmed_step_backward(model, cache, dscores, dh, dc, grads):
    lstm_cache, h = cache
    grads["w_out"] += np.outer(h, dscores)
    dh = dh + model.w_out @ dscores
    g, demb, dh_prev, dc_prev = lstm_step_backward(model.decoder, lstm_cache, dh, dc)
    grads["dec.w_x"] += g.w_x
    grads["dec.w_h"] += g.w_h
    grads["dec.b"] += g.b
    return dh_prev, dc_prev, demb


def stack_step_cached(layers, x, hs, cs):
    """One step of a stacked LSTM; returns (new_hs, new_cs, caches)."""
    new_hs, new_cs, caches = [], [], []
    inp = x
    for layer, h, c in zip(layers, hs, cs):
        c2, h2, cache = lstm_step_cached(inp, h, c, layer)
        new_hs.append(h2)
        new_cs.append(c2)
        caches.append(cache)
        inp = h2
    return new_hs, new_cs, caches


def stack_step_backward(layers, caches, dtop, dhs, dcs, grads):
    """Backward through one stacked-LSTM step.

    dtop: gradient on the top layer's hidden output beyond what dhs carries.
    dhs/dcs: per-layer state gradients from the next time step. Returns
    (dx, new_dhs, new_dcs).
    """
    new_dhs = [None] * len(layers)
    new_dcs = [None] * len(layers)
    dx_above = dtop
    for l in reversed(range(len(layers))):
        dh = dhs[l] + dx_above
        g, dx, dh_prev, dc_prev = lstm_step_backward(layers[l], caches[l], dh, dcs[l])
        grads[f"layers.{l}.w_x"] += g.w_x
        grads[f"layers.{l}.w_h"] += g.w_h
        grads[f"layers.{l}.b"] += g.b
        new_dhs[l] = dh_prev
        new_dcs[l] = dc_prev
        dx_above = dx
    return dx_above, new_dhs, new_dcs


# ---------------------------------------------------------------------------
# Greedy decoding
# ---------------------------------------------------------------------------

def greedy_token(scores: np.ndarray, n_classes: int) -> int:
    """Argmax over class ids and EOS; SOS and PAD are never emitted.

    Ties resolve to the lowest token id (np.argmax picks the first max).
    """
    masked = scores.copy()
    masked[n_classes] = -np.inf       # SOS
    masked[n_classes + 2] = -np.inf   # PAD
    return int(np.argmax(masked))


def decode_greedy(model: Seq2SeqModel, enc: EncoderStates, max_decode_len: Optional[int] = None) -> Prediction:
    """Greedy EOS-terminated decoding from encoder output.

    The first decoder input is the SOS embedding; each emitted token's
    embedding is fed back. Score vectors for every step (including the
    EOS step) are recorded; gru-aa also records one attention column per
    step.
    """
    roll = decode_rollout(model, enc, max_decode_len)
    att = None
    if model.variant == GRU_AA:
        att = AttentionTrace(weights=np.stack(roll["alphas"], axis=1))
    return Prediction(tokens=roll["tokens"], step_scores=np.array(roll["scores"]), attention=att)


def decode_rollout(model, enc, max_decode_len=None, want_cache=False):
    """Shared greedy loop; returns tokens, scores, alphas, caches, fed tokens."""
    if model.variant not in (LSTM_ED, GRU_AA):
        raise ValueError(f"decode_greedy supports lstm-ed and gru-aa, not {model.variant!r}")
    cap = model.max_decode_len if max_decode_len is None else max_decode_len
    if cap < 1:
        raise ValueError("max_decode_len must be >= 1")
    tokens: List[int] = []
    scores_list = []
    alphas = []
    caches = []
    fed = []
    prev_tok = model.sos
    h = enc.final_hidden.copy()
    c = enc.final_cell.copy() if enc.final_cell is not None else None
    while True:
        emb = model.w_emb[prev_tok]
        fed.append(prev_tok)
        if model.variant == GRU_AA:
            h, scores, alpha, cache = gruaa_step_cached(model, enc.states, h, emb)
            alphas.append(alpha)
        else:
            c, h, scores, cache = lstmed_step_cached(model, h, c, emb)
        scores_list.append(scores)
        if want_cache:
            caches.append(cache)
        tok = greedy_token(scores, model.n_classes)
        if tok == model.eos:
            break
        tokens.append(tok)
        if len(tokens) >= cap:
            break
        prev_tok = tok
    return {"tokens": tokens, "scores": scores_list, "alphas": alphas, "caches": caches, "fed": fed}


def forward_baseline(model: Seq2SeqModel, features: FeatureSequence, max_decode_len: Optional[int] = None) -> Prediction:
    """Greedy generation for the stacked-LSTM baselines.

    lstm-mean feeds the temporal mean of the frames at every step;
    lstm-ss consumes the whole feature sequence first and then free-runs
    on its own output embeddings starting from SOS.
    """
    if model.variant not in (LSTM_MEAN, LSTM_SS):
        raise ValueError(f"forward_baseline supports lstm-mean and lstm-ss, not {model.variant!r}")
    frames = features.frames
    if frames.shape[1] != model.feature_dim:
        raise ValueError(f"feature dim {frames.shape[1]} does not match model ({model.feature_dim})")
    cap = model.max_decode_len if max_decode_len is None else max_decode_len
    if cap < 1:
        raise ValueError("max_decode_len must be >= 1")
    L = len(model.layers)
    hs = [np.zeros(model.hidden_dim) for _ in range(L)]
    cs = [np.zeros(model.hidden_dim) for _ in range(L)]
    if model.variant == LSTM_MEAN:
        pooled = frames.mean(axis=0)
        next_input = lambda tok: pooled
    else:
        for t in range(frames.shape[0]):
            hs, cs, _ = stack_step_cached(model.layers, frames[t], hs, cs)
        next_input = lambda tok: model.w_emb[tok]
    tokens: List[int] = []
    scores_list = []
    prev_tok = model.sos
    while True:
        hs, cs, _ = stack_step_cached(model.layers, next_input(prev_tok), hs, cs)
        scores = hs[-1] @ model.w_out
        scores_list.append(scores)
        tok = greedy_token(scores, model.n_classes)
        if tok == model.eos:
            break
        tokens.append(tok)
        if len(tokens) >= cap:
            break
        prev_tok = tok
    return Prediction(tokens=tokens, step_scores=np.array(scores_list), attention=None)


def translate(model: Seq2SeqModel, features: FeatureSequence, max_decode_len: Optional[int] = None) -> Prediction:
    """Feature sequence in, predicted action sequence out (any variant)."""
    if model.variant in (LSTM_MEAN, LSTM_SS):
        return forward_baseline(model, features, max_decode_len)
    return decode_greedy(model, encode(model, features), max_decode_len)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_model(model: Seq2SeqModel, path) -> None:
    """Self-describing npz checkpoint; round trips bit-exactly.

    Written through zipfile with a fixed member timestamp so identical
    models produce identical bytes (np.savez would embed wall-clock time).
    """
    meta = {
        "variant": model.variant,
        "n_classes": model.n_classes,
        "feature_dim": model.feature_dim,
        "hidden_dim": model.hidden_dim,
        "embedding_dim": model.embedding_dim,
        "max_decode_len": model.max_decode_len,
        "num_layers": len(model.layers) if model.layers is not None else 0,
        "vocab_hash": model.vocab_hash,
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    arrays.update({name.replace(".", "__"): arr for name, arr in param_items(model)})
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            with zf.open(info, "w") as fp:
                np.lib.format.write_array(fp, np.ascontiguousarray(arr))


def load_model(path) -> Seq2SeqModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        model = _empty_model(meta)
        for name, arr in param_items(model):
            arr[...] = data[name.replace(".", "__")]
    return model


def _empty_model(meta) -> Seq2SeqModel:
    variant = meta["variant"]
    n_classes = meta["n_classes"]
    n_symbols = n_classes + 3
    hidden = meta["hidden_dim"]
    emb = meta["embedding_dim"]
    feat = meta["feature_dim"]
    m = Seq2SeqModel(
        variant=variant,
        n_classes=n_classes,
        feature_dim=feat,
        hidden_dim=hidden,
        embedding_dim=emb,
        max_decode_len=meta["max_decode_len"],
        vocab_hash=meta.get("vocab_hash", ""),
    )
    if variant == LSTM_ED:
        m.encoder = LstmCellParams.zeros(feat, hidden)
        m.decoder = LstmCellParams.zeros(emb, hidden)
        m.w_emb = np.zeros((n_symbols, emb))
        m.w_out = np.zeros((hidden, n_symbols))
    elif variant == GRU_AA:
        m.encoder = GruCellParams.zeros(feat, hidden)
        m.decoder = GruCellParams.zeros(emb + hidden, hidden)
        m.w_emb = np.zeros((n_symbols, emb))
        m.w_att = np.zeros((2 * hidden, hidden))
        m.v_att = np.zeros(hidden)
        m.w_out = np.zeros((2 * hidden + emb, n_symbols))
    else:
        n_layers = meta["num_layers"]
        m.layers = [LstmCellParams.zeros(feat, hidden)]
        for _ in range(n_layers - 1):
            m.layers.append(LstmCellParams.zeros(hidden, hidden))
        if variant == LSTM_SS:
            m.w_emb = np.zeros((n_symbols, feat))
        m.w_out = np.zeros((hidden, n_symbols))
    return m
