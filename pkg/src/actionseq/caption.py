"""Two-stage captioning: features -> action score sequence -> words.

Stage 1 is an attention seq2seq over action classes; during captioning it
emits its raw per-step score vectors (argmax is still computed internally
to detect EOS and to feed the next-step embedding). Stage 2 is another
attention seq2seq that encodes the score sequence and decodes words.

Training is two-phase: stage 1 is pre-trained on (features, actions)
exactly like any translation model, then both stages are trained jointly
on the caption cross-entropy, with gradients flowing through stage 2 into
stage 1's score outputs and onward through its decoder and encoder. The
internal argmax choices are locally constant, so the joint loss is
differentiable and checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .numkit import cross_entropy, cross_entropy_grad, softmax
from .translate import (
    GRU_AA,
    FeatureSequence,
    Seq2SeqModel,
    build_model,
    decode_rollout,
    encode,
    encode_cached,
    flatten_grads,
    get_flat_params,
    gru_step_backward,
    gruaa_step_backward,
    gruaa_step_cached,
    param_items,
    set_flat_params,
    translate,
    zero_grads,
    load_model,
    save_model,
)
from .train import EpochRow, TrainingConfig, _input_token, run_training_loop, train_model


@dataclass
class CaptionPipeline:
    stage1: Seq2SeqModel          # features -> action scores (gru-aa)
    stage2: Seq2SeqModel          # score vectors -> words (gru-aa)
    normalize_scores: bool = False  # feed softmax-normalized scores to stage 2

    def __post_init__(self):
        if self.stage1.variant != GRU_AA or self.stage2.variant != GRU_AA:
            raise ValueError("both pipeline stages must be gru-aa models")
        if self.stage2.feature_dim != self.stage1.n_symbols:
            raise ValueError(
                f"stage2 input dim {self.stage2.feature_dim} must equal "
                f"stage1 score dim {self.stage1.n_symbols}"
            )


def build_pipeline(
    n_action_classes: int,
    n_words: int,
    feature_dim: int,
    hidden_dim: int,
    embedding_dim: int,
    rng: np.random.Generator,
    max_action_len: int = 16,
    max_caption_len: int = 48,
    normalize_scores: bool = False,
) -> CaptionPipeline:
    stage1 = build_model(GRU_AA, n_action_classes, feature_dim, hidden_dim, embedding_dim,
                         rng, max_decode_len=max_action_len)
    stage2 = build_model(GRU_AA, n_words, n_action_classes + 3, hidden_dim, embedding_dim,
                         rng, max_decode_len=max_caption_len)
    return CaptionPipeline(stage1=stage1, stage2=stage2, normalize_scores=normalize_scores)


def action_scores(pipeline: CaptionPipeline, features: FeatureSequence) -> np.ndarray:
    """Stage-1 per-step score vectors, shape (Q, C + 3), EOS step included."""
    roll = decode_rollout(pipeline.stage1, encode(pipeline.stage1, features))
    return np.array(roll["scores"])


def _stage2_frames(pipeline: CaptionPipeline, scores: np.ndarray) -> np.ndarray:
    if pipeline.normalize_scores:
        return np.stack([softmax(row) for row in scores])
    return scores


def generate_caption(pipeline: CaptionPipeline, features: FeatureSequence,
                     max_words: Optional[int] = None) -> List[int]:
    """Word ids for one video; deterministic given the pipeline parameters."""
    scores = action_scores(pipeline, features)
    seq = FeatureSequence(frames=_stage2_frames(pipeline, scores), source_id=features.source_id)
    return translate(pipeline.stage2, seq, max_words).tokens


# ---------------------------------------------------------------------------
# Flat parameters over both stages
# ---------------------------------------------------------------------------

def pipeline_param_items(pipeline: CaptionPipeline):
    return ([("s1." + n, a) for n, a in param_items(pipeline.stage1)]
            + [("s2." + n, a) for n, a in param_items(pipeline.stage2)])


def get_pipeline_params(pipeline: CaptionPipeline) -> np.ndarray:
    return np.concatenate([get_flat_params(pipeline.stage1), get_flat_params(pipeline.stage2)])


def set_pipeline_params(pipeline: CaptionPipeline, vec: np.ndarray) -> None:
    n1 = get_flat_params(pipeline.stage1).size
    set_flat_params(pipeline.stage1, vec[:n1])
    set_flat_params(pipeline.stage2, vec[n1:])


# ---------------------------------------------------------------------------
# Joint caption loss
# ---------------------------------------------------------------------------

def caption_loss(
    pipeline: CaptionPipeline,
    features: FeatureSequence,
    word_target: Sequence[int],
    forcing_draws: Optional[Sequence[bool]] = None,
    want_grads: bool = True,
) -> Tuple[float, Optional[np.ndarray]]:
    """Cross-entropy of the teacher-forced stage-2 word decoder, end to end.

    Stage 1 free-runs (greedy, as at inference); teacher forcing applies
    to stage-2 word inputs only. Returns (loss, flat gradient over both
    stages in pipeline_param_items order).
    """
    s1, s2 = pipeline.stage1, pipeline.stage2
    word_target = list(word_target)
    for w in word_target:
        if not 0 <= w < s2.n_classes:
            raise ValueError(f"caption token {w} is not a word id (V={s2.n_classes})")

    # Stage 1 forward: greedy rollout, keeping caches for the backward pass.
    enc1, enc1_caches = encode_cached(s1, features)
    roll = decode_rollout(s1, enc1, want_cache=True)
    score_seq = np.array(roll["scores"])                 # (Q, C + 3)
    frames2 = _stage2_frames(pipeline, score_seq)

    # Stage 2 forward: encode scores, teacher-forced word decoding.
    enc2, enc2_caches = encode_cached(s2, FeatureSequence(frames=frames2))
    steps = word_target + [s2.eos]
    if forcing_draws is not None and len(forcing_draws) < len(steps):
        raise ValueError(f"need {len(steps)} forcing draws, got {len(forcing_draws)}")
    h = enc2.final_hidden
    loss = 0.0
    records = []
    scores = None
    for q, tgt in enumerate(steps):
        tok = _input_token(s2, q, word_target, forcing_draws, scores)
        h, scores, _, cache = gruaa_step_cached(s2, enc2.states, h, s2.w_emb[tok])
        loss += cross_entropy(scores, tgt)
        records.append((tok, cache, cross_entropy_grad(scores, tgt)))
    if not want_grads:
        return loss, None

    # Stage 2 backward, keeping the gradients on its encoder inputs.
    grads2 = zero_grads(s2)
    dstates2 = np.zeros_like(enc2.states)
    dh2 = np.zeros(s2.hidden_dim)
    for tok, cache, dscores in reversed(records):
        dh2, demb = gruaa_step_backward(s2, cache, dscores, dh2, grads2, dstates2)
        grads2["w_emb"][tok] += demb
    dframes2 = _gru_encoder_backward_inputs(s2, enc2_caches, dstates2, dh2, grads2)

    # Through the optional softmax normalization back onto raw scores.
    if pipeline.normalize_scores:
        dscore_seq = np.empty_like(dframes2)
        for q in range(dscore_seq.shape[0]):
            p = frames2[q]
            dscore_seq[q] = p * (dframes2[q] - np.dot(p, dframes2[q]))
    else:
        dscore_seq = dframes2

    # Stage 1 backward through its greedy score emission and encoder.
    grads1 = zero_grads(s1)
    dstates1 = np.zeros_like(enc1.states)
    dh1 = np.zeros(s1.hidden_dim)
    for q in reversed(range(len(roll["caches"]))):
        dh1, demb = gruaa_step_backward(s1, roll["caches"][q], dscore_seq[q], dh1, grads1, dstates1)
        grads1["w_emb"][roll["fed"][q]] += demb
    _accumulate_gru_encoder(s1, enc1_caches, dstates1, dh1, grads1)

    flat = np.concatenate([flatten_grads(s1, grads1), flatten_grads(s2, grads2)])
    return loss, flat


def _gru_encoder_backward_inputs(model, caches, dstates, dh_final, grads) -> np.ndarray:
    """GRU encoder BPTT that also returns the gradients w.r.t. its inputs."""
    t_len = len(caches)
    dx_all = np.empty((t_len, model.feature_dim))
    dh = dh_final.copy()
    for t in reversed(range(t_len)):
        dh = dh + dstates[t]
        g, dx, dh = gru_step_backward(model.encoder, caches[t], dh)
        grads["enc.w_x"] += g.w_x
        grads["enc.w_h"] += g.w_h
        grads["enc.b"] += g.b
        dx_all[t] = dx
    return dx_all


def _accumulate_gru_encoder(model, caches, dstates, dh_final, grads) -> None:
    dh = dh_final.copy()
    for t in reversed(range(len(caches))):
        dh = dh + dstates[t]
        g, _, dh = gru_step_backward(model.encoder, caches[t], dh)
        grads["enc.w_x"] += g.w_x
        grads["enc.w_h"] += g.w_h
        grads["enc.b"] += g.b


# ---------------------------------------------------------------------------
# Two-phase training
# ---------------------------------------------------------------------------

def train_pipeline(
    pipeline: CaptionPipeline,
    train_samples: Sequence,
    val_samples: Sequence,
    pretrain_config: Optional[TrainingConfig],
    joint_config: TrainingConfig,
) -> Tuple[CaptionPipeline, List[EpochRow], List[EpochRow]]:
    """Pre-train stage 1 on action sequences, then train both stages jointly
    on the caption loss. Returns (pipeline, stage-1 log, joint log).

    Pass pretrain_config=None to skip phase 1 when stage 1 is already a
    trained action model."""
    for s in train_samples:
        if not s.caption:
            raise ValueError(f"sample {s.features.source_id!r} has no caption")
    rows1: List[EpochRow] = []
    if pretrain_config is not None:
        _, rows1 = train_model(pipeline.stage1, train_samples, val_samples, pretrain_config)
    rows2 = run_training_loop(
        get_params=lambda: get_pipeline_params(pipeline),
        set_params=lambda vec: set_pipeline_params(pipeline, vec),
        loss_and_grad=lambda s, draws: caption_loss(pipeline, s.features, s.caption, draws),
        eval_loss=lambda s: caption_loss(pipeline, s.features, s.caption, None, want_grads=False)[0],
        predict_tokens=lambda s: generate_caption(pipeline, s.features),
        target_tokens=lambda s: s.caption,
        train_samples=train_samples,
        val_samples=val_samples,
        config=joint_config,
    )
    return pipeline, rows1, rows2


# ---------------------------------------------------------------------------
# Pipeline checkpoints
# ---------------------------------------------------------------------------

def save_pipeline(pipeline: CaptionPipeline, path_stage1, path_stage2) -> None:
    save_model(pipeline.stage1, path_stage1)
    save_model(pipeline.stage2, path_stage2)


def load_pipeline(path_stage1, path_stage2, normalize_scores: bool = False) -> CaptionPipeline:
    return CaptionPipeline(
        stage1=load_model(path_stage1),
        stage2=load_model(path_stage2),
        normalize_scores=normalize_scores,
    )
