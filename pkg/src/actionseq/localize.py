"""Attention-derived action localization at 25 equidistant frames.

A trained attention model never sees temporal annotations; its alignment
weights are the only bridge from decoding steps back onto the timeline.
Scoring rule "attention-mass": eval frame t with nearest encoder step t'
gets score(t, c) = (1/Q) * sum_q alpha[t', q] * p_q[c], where p_q is the
softmax of decoding step q's scores restricted to the class ids. The 1/Q
factor keeps every frame's class vector a sub-convex combination (sums
to at most 1) without changing per-class rankings within a video. The
rule is pluggable; "hard-assign" scores each frame by the distribution
of the decoding step with the most attention on it.

Ground-truth boundaries enter only through evaluate_localization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .metrics import frame_map
from .numkit import softmax
from .translate import GRU_AA, FeatureSequence, Seq2SeqModel, translate

N_EVAL_FRAMES = 25

RULES = ("attention-mass", "hard-assign")


@dataclass
class LocalizationGrid:
    video_id: str
    n_frames: int              # encoder steps T in the source video
    scores: np.ndarray         # (25, C)
    timestamps: np.ndarray     # (25,) strictly increasing positions in [0, T)
    step_indices: np.ndarray   # (25,) nearest encoder steps (may repeat if T < 25)


def eval_frame_positions(n_frames: int) -> Tuple[np.ndarray, np.ndarray]:
    """Positions t*T/25 + T/50 for t in 0..24 and their nearest encoder steps."""
    t = np.arange(N_EVAL_FRAMES)
    positions = t * n_frames / N_EVAL_FRAMES + n_frames / (2 * N_EVAL_FRAMES)
    steps = np.clip(np.rint(positions).astype(int), 0, n_frames - 1)
    return positions, steps


def grid_scores(frame_alpha: np.ndarray, step_probs: np.ndarray, rule: str = "attention-mass") -> np.ndarray:
    """Apply a scoring rule to per-frame attention weights and per-step class
    distributions. frame_alpha: (frames, Q), step_probs: (Q, C)."""
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}, expected one of {RULES}")
    if rule == "attention-mass":
        return frame_alpha @ step_probs / frame_alpha.shape[1]
    return step_probs[np.argmax(frame_alpha, axis=1)]


def localize(model: Seq2SeqModel, features: FeatureSequence, rule: str = "attention-mass") -> LocalizationGrid:
    if model.variant != GRU_AA:
        raise ValueError(f"localization needs an attention model, got {model.variant!r}")
    pred = translate(model, features)
    alpha = pred.attention.weights                       # (T, Q)
    probs = np.stack([softmax(s)[: model.n_classes] for s in pred.step_scores])  # (Q, C)
    positions, steps = eval_frame_positions(features.length)
    return LocalizationGrid(
        video_id=features.source_id,
        n_frames=features.length,
        scores=grid_scores(alpha[steps, :], probs, rule),
        timestamps=positions,
        step_indices=steps,
    )


def frame_labels(sample, n_classes: int) -> np.ndarray:
    """Boolean (25, C) labels: timestamp membership in the boundary segments."""
    if not sample.boundaries:
        raise ValueError(f"sample {sample.features.source_id!r} has no boundaries")
    positions, _ = eval_frame_positions(sample.features.length)
    labels = np.zeros((N_EVAL_FRAMES, n_classes), dtype=bool)
    for start, end, cls in sample.boundaries:
        inside = (positions >= start) & (positions < end)
        labels[inside, cls] = True
    return labels


def evaluate_localization(grids: Sequence[LocalizationGrid], samples: Sequence) -> float:
    """Pooled frame mAP: per-class ranking across all frames of all videos."""
    if len(grids) != len(samples):
        raise ValueError(f"{len(grids)} grids vs {len(samples)} samples")
    if len(grids) == 0:
        raise ValueError("need at least one video")
    n_classes = grids[0].scores.shape[1]
    scores = np.concatenate([g.scores for g in grids], axis=0)
    labels = np.concatenate([frame_labels(s, n_classes) for s in samples], axis=0)
    return frame_map(scores, labels)


def shuffled_baseline(grids: Sequence[LocalizationGrid], rng: np.random.Generator) -> List[LocalizationGrid]:
    """Random control: permute each video's frame rows, destroying alignment."""
    out = []
    for g in grids:
        perm = rng.permutation(N_EVAL_FRAMES)
        out.append(LocalizationGrid(
            video_id=g.video_id,
            n_frames=g.n_frames,
            scores=g.scores[perm],
            timestamps=g.timestamps,
            step_indices=g.step_indices,
        ))
    return out


def dump_grids(grids: Sequence[LocalizationGrid], path) -> None:
    """Text dump: per video a "video_id T" line, then 25 rows of C decimals."""
    with open(path, "w", encoding="utf-8") as f:
        for g in grids:
            f.write(f"{g.video_id} {g.n_frames}\n")
            for row in g.scores:
                f.write(" ".join(repr(float(x)) for x in row) + "\n")
