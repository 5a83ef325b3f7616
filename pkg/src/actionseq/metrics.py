"""Sequence and localization metrics, all reported on a 0-100 scale.

bleu follows the classic corpus-level definition: clipped n-gram matches
and candidate counts are summed over the whole corpus per order, combined
by a geometric mean and a brevity penalty. A sentence-level average is
available behind a flag for sensitivity checks.

seq_item_accuracy counts position-exact matches and divides by the longer
of the two lengths, which is the rule consistent with comparing a
prediction that is longer, shorter, or misaligned against the truth.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np


@dataclass
class MetricReport:
    metric: str
    value: float      # 0..100
    count: int        # number of evaluated pairs

    def to_json(self) -> str:
        return json.dumps({"metric": self.metric, "value": self.value, "count": self.count})


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def _clipped_matches(cand: Sequence, ref: Sequence, n: int) -> Tuple[int, int]:
    cand_counts = _ngrams(cand, n)
    ref_counts = _ngrams(ref, n)
    matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
    return matched, sum(cand_counts.values())


def bleu(candidates: List[Sequence], references: List[Sequence], n: int = 4,
         corpus_level: bool = True) -> MetricReport:
    """Clipped n-gram precision BLEU with brevity penalty, one reference each.

    Corpus level: matches and counts are pooled over all pairs before the
    geometric mean. Any zero precision gives a 0 score. Brevity penalty is
    1 when the total candidate length exceeds the total reference length,
    else exp(1 - ref_len / cand_len).
    """
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if len(candidates) < 1:
        raise ValueError("need at least one candidate/reference pair")
    if n < 1:
        raise ValueError("n must be >= 1")
    if corpus_level:
        value = _bleu_corpus(candidates, references, n)
    else:
        value = sum(_bleu_corpus([c], [r], n) for c, r in zip(candidates, references)) / len(candidates)
    return MetricReport(metric=f"bleu{n}", value=value, count=len(candidates))


def _bleu_corpus(candidates, references, n) -> float:
    matched = [0] * n
    total = [0] * n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for k in range(1, n + 1):
            m, t = _clipped_matches(cand, ref, k)
            matched[k - 1] += m
            total[k - 1] += t
    log_sum = 0.0
    for k in range(n):
        if matched[k] == 0 or total[k] == 0:
            return 0.0
        log_sum += math.log(matched[k] / total[k]) / n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_sum)


def seq_item_accuracy(predicted: Sequence, ground_truth: Sequence) -> float:
    """Percentage of positions where prediction equals truth exactly.

    The denominator is the longer of the two lengths, so both extra and
    missing items count against the score. Two empty sequences score 100.
    """
    if len(predicted) == 0 and len(ground_truth) == 0:
        return 100.0
    matches = sum(1 for a, b in zip(predicted, ground_truth) if a == b)
    return 100.0 * matches / max(len(predicted), len(ground_truth))


def rouge_l(candidate: Sequence, reference: Sequence, beta: float = 1.2) -> float:
    """LCS-based F-measure: P = LCS/|cand|, R = LCS/|ref|,
    F = (1 + beta^2) P R / (R + beta^2 P), on a 0-100 scale."""
    if len(reference) == 0:
        raise ValueError("reference must be non-empty")
    if len(candidate) == 0:
        return 0.0
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    b2 = beta * beta
    return 100.0 * (1.0 + b2) * p * r / (r + b2 * p)


def _lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def frame_map(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean average precision over classes for frames ranked by score.

    scores: (frames, classes) real grid; labels: same-shape booleans.
    Per class, AP is the mean over positive frames of precision at their
    rank (ties broken by frame order). Classes without positives are
    skipped; having no positives at all is an error.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} vs labels {labels.shape}")
    if not labels.any():
        raise ValueError("no positive labels in any class")
    aps = []
    for c in range(scores.shape[1]):
        pos = labels[:, c]
        n_pos = int(pos.sum())
        if n_pos == 0:
            continue
        order = np.argsort(-scores[:, c], kind="stable")
        ranked = pos[order]
        hits = np.cumsum(ranked)
        ranks = np.arange(1, len(ranked) + 1)
        precisions = hits[ranked] / ranks[ranked]
        aps.append(precisions.mean())
    return 100.0 * float(np.mean(aps))
