"""Teacher-forced cross-entropy training.

A sequence loss is the sum of per-step cross-entropies over the target
tokens followed by EOS (p + 1 decoder steps). Per step the decoder input
is the embedding of either the ground-truth previous token (teacher
forcing) or the model's own greedy choice, controlled by a boolean per
step. The forcing coin is drawn once per sequence per epoch by default;
per-step draws are a config switch.

Batches average per-sequence gradients, clip to a global norm, and apply
Adam. Everything is driven by one seeded generator so identical seeds
give bit-identical loss logs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .numkit import cross_entropy, cross_entropy_grad
from .translate import (
    GRU_AA,
    LSTM_ED,
    LSTM_SS,
    FeatureSequence,
    Seq2SeqModel,
    encode_cached,
    flatten_grads,
    get_flat_params,
    greedy_token,
    gru_encoder_backward,
    gruaa_step_backward,
    gruaa_step_cached,
    lstm_encoder_backward,
    lstmed_step_backward,
    lstmed_step_cached,
    set_flat_params,
    stack_step_backward,
    stack_step_cached,
    translate,
    zero_grads,
)
from . import metrics


@dataclass
class TrainingConfig:
    hidden_dim: int = 512
    embedding_dim: int = 512
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    teacher_forcing_prob: float = 0.5
    patience: int = 3            # early stopping, epochs without val-loss improvement
    seed: int = 0
    per_step_forcing: bool = False
    num_layers: int = 2          # stacked-LSTM baselines only
    clip_norm: float = 5.0
    max_decode_len: Optional[int] = None  # None: 2 * (longest training target + 1)

    def __post_init__(self):
        for name in ("hidden_dim", "embedding_dim", "batch_size", "epochs", "patience", "num_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.teacher_forcing_prob <= 1.0:
            raise ValueError("teacher_forcing_prob must be in [0, 1]")

    @classmethod
    def desk(cls, **overrides) -> "TrainingConfig":
        """Laptop-scale profile: hidden 64, embedding 32, batch 8, 10 epochs."""
        base = cls(hidden_dim=64, embedding_dim=32, batch_size=8, epochs=10)
        return replace(base, **overrides)


def default_decode_cap(targets: Sequence[Sequence[int]]) -> int:
    longest = max((len(t) for t in targets), default=0)
    return 2 * (longest + 1)


# ---------------------------------------------------------------------------
# Sequence loss (forward + hand-derived backward)
# ---------------------------------------------------------------------------

def _clean_target(target: Sequence[int], model: Seq2SeqModel) -> List[int]:
    target = list(target)
    while target and target[-1] == model.pad:
        target.pop()          # batch padding; PAD positions contribute no loss
    for t in target:
        if not 0 <= t < model.n_classes:
            raise ValueError(f"target token {t} is not a class id (C={model.n_classes})")
    return target


def _input_token(model, q, target, draws, prev_scores):
    """Decoder input token for step q (0-based): SOS, forced truth, or own argmax."""
    if q == 0:
        return model.sos
    if draws is None or draws[q]:
        return target[q - 1]
    return greedy_token(prev_scores, model.n_classes)


def sequence_loss(
    model: Seq2SeqModel,
    features: FeatureSequence,
    target: Sequence[int],
    forcing_draws: Optional[Sequence[bool]] = None,
    want_grads: bool = True,
) -> Tuple[float, Optional[dict]]:
    """Summed cross-entropy over p + 1 decoder steps (targets then EOS).

    forcing_draws[q] selects the input for step q >= 1: ground truth when
    true, the model's own previous argmax otherwise. None means fully
    teacher forced. Returns (loss, gradient dict keyed like param_items),
    or (loss, None) when want_grads is false.
    """
    target = _clean_target(target, model)
    steps = target + [model.eos]
    if forcing_draws is not None and len(forcing_draws) < len(steps):
        raise ValueError(f"need {len(steps)} forcing draws, got {len(forcing_draws)}")
    if model.variant == GRU_AA:
        return _loss_gruaa(model, features, steps, target, forcing_draws, want_grads)
    if model.variant == LSTM_ED:
        return _loss_lstmed(model, features, steps, target, forcing_draws, want_grads)
    return _loss_stacked(model, features, steps, target, forcing_draws, want_grads)


def _loss_gruaa(model, features, steps, target, draws, want_grads):
    enc, enc_caches = encode_cached(model, features)
    h = enc.final_hidden
    loss = 0.0
    records = []
    scores = None
    for q, tgt in enumerate(steps):
        tok = _input_token(model, q, target, draws, scores)
        h, scores, _, cache = gruaa_step_cached(model, enc.states, h, model.w_emb[tok])
        loss += cross_entropy(scores, tgt)
        records.append((tok, cache, cross_entropy_grad(scores, tgt)))
    if not want_grads:
        return loss, None
    grads = zero_grads(model)
    dstates = np.zeros_like(enc.states)
    dh = np.zeros(model.hidden_dim)
    for tok, cache, dscores in reversed(records):
        dh, demb = gruaa_step_backward(model, cache, dscores, dh, grads, dstates)
        grads["w_emb"][tok] += demb
    gru_encoder_backward(model, enc_caches, dstates, dh, grads)
    return loss, grads


def _loss_lstmed(model, features, steps, target, draws, want_grads):
    enc, enc_caches = encode_cached(model, features)
    h = enc.final_hidden
    c = enc.final_cell
    loss = 0.0
    records = []
    scores = None
    for q, tgt in enumerate(steps):
        tok = _input_token(model, q, target, draws, scores)
        c, h, scores, cache = lstmed_step_cached(model, h, c, model.w_emb[tok])
        loss += cross_entropy(scores, tgt)
        records.append((tok, cache, cross_entropy_grad(scores, tgt)))
    if not want_grads:
        return loss, None
    grads = zero_grads(model)
    dh = np.zeros(model.hidden_dim)
    dc = np.zeros(model.hidden_dim)
    for tok, cache, dscores in reversed(records):
        dh, dc, demb = lstmed_step_backward(model, cache, dscores, dh, dc, grads)
        grads["w_emb"][tok] += demb
    lstm_encoder_backward(model, enc_caches, dh, dc, grads)
    return loss, grads


def _loss_stacked(model, features, steps, target, draws, want_grads):
    frames = features.frames
    if frames.shape[1] != model.feature_dim:
        raise ValueError(f"feature dim {frames.shape[1]} does not match model ({model.feature_dim})")
    n_layers = len(model.layers)
    hs = [np.zeros(model.hidden_dim) for _ in range(n_layers)]
    cs = [np.zeros(model.hidden_dim) for _ in range(n_layers)]
    consume_caches = []
    if model.variant == LSTM_SS:
        for t in range(frames.shape[0]):
            hs, cs, caches = stack_step_cached(model.layers, frames[t], hs, cs)
            consume_caches.append(caches)
        step_input = lambda tok: model.w_emb[tok]
    else:
        pooled = frames.mean(axis=0)
        step_input = lambda tok: pooled
    loss = 0.0
    records = []
    scores = None
    for q, tgt in enumerate(steps):
        # lstm-mean ignores the token; its input is the pooled vector every step
        tok = _input_token(model, q, target, draws, scores)
        hs, cs, caches = stack_step_cached(model.layers, step_input(tok), hs, cs)
        scores = hs[-1] @ model.w_out
        loss += cross_entropy(scores, tgt)
        records.append((tok, caches, hs[-1], cross_entropy_grad(scores, tgt)))
    if not want_grads:
        return loss, None
    grads = zero_grads(model)
    dhs = [np.zeros(model.hidden_dim) for _ in range(n_layers)]
    dcs = [np.zeros(model.hidden_dim) for _ in range(n_layers)]
    for tok, caches, top_h, dscores in reversed(records):
        grads["w_out"] += np.outer(top_h, dscores)
        dtop = model.w_out @ dscores
        dx, dhs, dcs = stack_step_backward(model.layers, caches, dtop, dhs, dcs, grads)
        if model.variant == LSTM_SS:
            grads["w_emb"][tok] += dx
    for caches in reversed(consume_caches):
        _, dhs, dcs = stack_step_backward(model.layers, caches, np.zeros(model.hidden_dim), dhs, dcs, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# Optimizer and the generic training loop
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, n_params: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    val_loss: float
    val_bleu1: float


def format_loss_log(rows: Sequence[EpochRow]) -> str:
    out = ["epoch,train_loss,val_loss,val_bleu1"]
    for r in rows:
        out.append(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.val_bleu1!r}")
    return "\n".join(out) + "\n"


def run_training_loop(
    get_params: Callable[[], np.ndarray],
    set_params: Callable[[np.ndarray], None],
    loss_and_grad: Callable[[object, Optional[np.ndarray]], Tuple[float, np.ndarray]],
    eval_loss: Callable[[object], float],
    predict_tokens: Callable[[object], List[int]],
    target_tokens: Callable[[object], List[int]],
    train_samples: Sequence,
    val_samples: Sequence,
    config: TrainingConfig,
) -> List[EpochRow]:
    """Epoch loop shared by model training and joint pipeline training.

    Restores the best-validation parameters before returning. Gradient
    reduction is an ordered sum over the batch, so results depend only on
    the seed.
    """
    if len(train_samples) == 0 or len(val_samples) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = np.random.default_rng(config.seed)
    adam = Adam(get_params().size)
    rows: List[EpochRow] = []
    best_loss = np.inf
    best_params = get_params()
    best_epoch = -1
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_samples))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            acc = None
            for idx in batch:
                sample = train_samples[idx]
                n_steps = len(target_tokens(sample)) + 1
                if config.per_step_forcing:
                    draws = rng.random(n_steps) < config.teacher_forcing_prob
                else:
                    draws = np.full(n_steps, rng.random() < config.teacher_forcing_prob)
                loss, grad = loss_and_grad(sample, draws)
                epoch_loss += loss
                acc = grad if acc is None else acc + grad
            acc /= len(batch)
            acc = clip_global_norm(acc, config.clip_norm)
            set_params(adam.step(get_params(), acc, config.learning_rate))
        train_loss = epoch_loss / len(train_samples)
        val_loss = sum(eval_loss(s) for s in val_samples) / len(val_samples)
        preds = [predict_tokens(s) for s in val_samples]
        refs = [target_tokens(s) for s in val_samples]
        val_bleu1 = metrics.bleu(preds, refs, n=1).value
        rows.append(EpochRow(epoch=epoch, train_loss=train_loss, val_loss=val_loss, val_bleu1=val_bleu1))
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = get_params()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    set_params(best_params)
    return rows


def train_model(
    model: Seq2SeqModel,
    train_samples: Sequence,
    val_samples: Sequence,
    config: TrainingConfig,
    target_of: Callable = lambda s: s.actions,
) -> Tuple[Seq2SeqModel, List[EpochRow]]:
    """Train one model variant in place; returns it at its best-validation state."""
    rows = run_training_loop(
        get_params=lambda: get_flat_params(model),
        set_params=lambda vec: set_flat_params(model, vec),
        loss_and_grad=lambda s, draws: _flat_loss(model, s, target_of(s), draws),
        eval_loss=lambda s: sequence_loss(model, s.features, target_of(s), None, want_grads=False)[0],
        predict_tokens=lambda s: translate(model, s.features).tokens,
        target_tokens=target_of,
        train_samples=train_samples,
        val_samples=val_samples,
        config=config,
    )
    return model, rows


def _flat_loss(model, sample, target, draws):
    loss, grads = sequence_loss(model, sample.features, target, draws)
    return loss, flatten_grads(model, grads)
