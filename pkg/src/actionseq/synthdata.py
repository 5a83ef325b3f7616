"""Seeded synthetic dataset generation and dataset/feature file formats.

Each sample is a quadruple: a feature sequence (one noisy class-prototype
vector per frame), the action sequence, a templated caption, and the
segment boundaries. Boundaries exist for evaluation only; nothing in the
training path reads them.

Generation is deterministic given the spec seed and parallelizable per
sample: sample i draws from its own generator seeded with (seed, 1, i),
prototypes from (seed, 0), so results do not depend on generation order.

Dataset file format (one file per split, UTF-8 text):

    actionseq-dataset 1
    classes <name> <name> ...
    words <word> <word> ...
    sample <id>
    shape <T> <D_in>
    <T lines of D_in decimals>         (repr round-trip precise)
    labels <action names, possibly none>
    caption <words, possibly none>
    segments <start:end:name ...>      (possibly none)
    end
    ... further samples ...

External feature files hold one video each: a header line "T D_in"
followed by T rows of D_in decimals; the matching labels file maps video
ids (file stems) to whitespace-separated action-name sequences:
"<video_id> <name> <name> ...".
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from .translate import FeatureSequence
from .vocab import Vocabulary

MAGIC = "actionseq-dataset 1"

DEFAULT_VERBS = [
    "walk", "run", "jump", "sit", "stand", "wave", "point", "turn",
    "bend", "clap", "kneel", "stretch", "reach", "lift", "drop", "push",
    "pull", "throw", "catch", "kick", "spin", "crouch", "lean", "climb",
    "crawl", "slide", "step", "hop", "nod", "shrug",
]


class GenerationError(RuntimeError):
    """Raised when the generator cannot satisfy the spec (e.g. prototype separation)."""


class DataFormatError(ValueError):
    """Malformed dataset or feature file; message carries the location."""


def class_names(n: int) -> List[str]:
    if n <= len(DEFAULT_VERBS):
        return DEFAULT_VERBS[:n]
    return DEFAULT_VERBS + [f"act{i}" for i in range(n - len(DEFAULT_VERBS))]


def caption_words(action_names: Sequence[str]) -> List[str]:
    """Template grammar: "the person <verb>" clauses joined by "then"."""
    words: List[str] = []
    for i, name in enumerate(action_names):
        if i > 0:
            words.append("then")
        words += ["the", "person", name]
    return words


def word_list(action_class_names: Sequence[str]) -> List[str]:
    return ["the", "person", "then"] + list(action_class_names)


@dataclass
class SyntheticSpec:
    n_classes: int = 10
    feature_dim: int = 16
    actions_min: int = 2
    actions_max: int = 5
    segment_min: int = 4          # frames per action
    segment_max: int = 10
    noise_sigma: float = 1.0
    prototype_separation: float = 8.0
    transition: Union[str, np.ndarray] = "uniform"   # "uniform" or row-stochastic (C, C)
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.actions_min < 1:
            raise ValueError("actions_min must be >= 1")
        if self.actions_max < self.actions_min:
            raise ValueError("actions_max must be >= actions_min")
        if self.segment_min < 1:
            raise ValueError("segment_min must be >= 1")
        if self.segment_max < self.segment_min:
            raise ValueError("segment_max must be >= segment_min")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.prototype_separation <= 0:
            raise ValueError("prototype_separation must be > 0")
        if isinstance(self.transition, str):
            if self.transition != "uniform":
                raise ValueError(f"transition must be 'uniform' or a matrix, got {self.transition!r}")
        else:
            t = np.asarray(self.transition, dtype=np.float64)
            if t.shape != (self.n_classes, self.n_classes):
                raise ValueError(f"transition must be ({self.n_classes}, {self.n_classes})")
            if (t < 0).any() or np.abs(t.sum(axis=1) - 1.0).max() > 1e-9:
                raise ValueError("transition rows must be nonnegative and sum to 1")
            self.transition = t

    def transition_matrix(self) -> np.ndarray:
        if isinstance(self.transition, str):
            return np.full((self.n_classes, self.n_classes), 1.0 / self.n_classes)
        return self.transition


@dataclass
class Sample:
    features: FeatureSequence
    actions: List[int]
    caption: List[int] = field(default_factory=list)
    boundaries: List[Tuple[int, int, int]] = field(default_factory=list)  # (start, end, class)


@dataclass
class Dataset:
    samples: List[Sample]
    action_vocab: Vocabulary
    word_vocab: Vocabulary


def prototypes(spec: SyntheticSpec, max_tries: int = 200) -> np.ndarray:
    """Class prototype vectors with pairwise distance >= prototype_separation."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    protos = np.empty((spec.n_classes, spec.feature_dim))
    for c in range(spec.n_classes):
        for attempt in range(max_tries):
            cand = rng.normal(0.0, spec.prototype_separation, spec.feature_dim)
            if c == 0 or np.min(np.linalg.norm(protos[:c] - cand, axis=1)) >= spec.prototype_separation:
                protos[c] = cand
                break
        else:
            raise GenerationError(
                f"could not place prototype {c} at separation {spec.prototype_separation} "
                f"in {max_tries} tries (feature_dim={spec.feature_dim})"
            )
    return protos


def generate(spec: SyntheticSpec, count: int, start_index: int = 0) -> List[Sample]:
    """Draw `count` samples; sample i is independent of all others given the seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    protos = prototypes(spec)
    trans = spec.transition_matrix()
    names = class_names(spec.n_classes)
    words = Vocabulary(word_list(names))
    out = []
    for i in range(start_index, start_index + count):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1, i]))
        p = int(rng.integers(spec.actions_min, spec.actions_max + 1))
        actions = [int(rng.integers(spec.n_classes))]
        for _ in range(p - 1):
            actions.append(int(rng.choice(spec.n_classes, p=trans[actions[-1]])))
        frames = []
        boundaries = []
        t = 0
        for c in actions:
            d = int(rng.integers(spec.segment_min, spec.segment_max + 1))
            frames.append(protos[c] + rng.normal(0.0, spec.noise_sigma, (d, spec.feature_dim)))
            boundaries.append((t, t + d, c))
            t += d
        caption = words.encode(caption_words([names[c] for c in actions]))
        out.append(Sample(
            features=FeatureSequence(frames=np.concatenate(frames, axis=0), source_id=f"synth{i:06d}"),
            actions=actions,
            caption=caption,
            boundaries=boundaries,
        ))
    return out


def build_vocabs(spec: SyntheticSpec) -> Tuple[Vocabulary, Vocabulary]:
    names = class_names(spec.n_classes)
    return Vocabulary(names), Vocabulary(word_list(names))


def samples_equal(a: Sample, b: Sample) -> bool:
    return (
        a.features.source_id == b.features.source_id
        and a.features.frames.shape == b.features.frames.shape
        and np.array_equal(a.features.frames, b.features.frames)
        and a.actions == b.actions
        and a.caption == b.caption
        and a.boundaries == b.boundaries
    )


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def _fmt_row(row: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in row)


def save_dataset(path, samples: Sequence[Sample], action_vocab: Vocabulary, word_vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(MAGIC + "\n")
        f.write("classes " + " ".join(action_vocab.names) + "\n")
        f.write("words " + " ".join(word_vocab.names) + "\n")
        for s in samples:
            f.write(f"sample {s.features.source_id}\n")
            f.write(f"shape {s.features.length} {s.features.dim}\n")
            for row in s.features.frames:
                f.write(_fmt_row(row) + "\n")
            f.write(("labels " + " ".join(action_vocab.decode(s.actions))).rstrip() + "\n")
            f.write(("caption " + " ".join(word_vocab.decode(s.caption))).rstrip() + "\n")
            segs = " ".join(f"{a}:{b}:{action_vocab.names[c]}" for a, b, c in s.boundaries)
            f.write(("segments " + segs).rstrip() + "\n")
            f.write("end\n")


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()

    def fail(lineno, msg):
        raise DataFormatError(f"{path}:{lineno + 1}: {msg}")

    if not lines or lines[0] != MAGIC:
        fail(0, f"expected header {MAGIC!r}")
    if len(lines) < 3 or not lines[1].startswith("classes ") or not lines[2].startswith("words "):
        fail(1, "expected 'classes ...' and 'words ...' header lines")
    action_vocab = Vocabulary(lines[1].split()[1:])
    word_vocab = Vocabulary(lines[2].split()[1:])
    def field_line(i, key):
        if i >= len(lines):
            fail(len(lines) - 1, f"file ends where '{key}' was expected")
        if lines[i] != key and not lines[i].startswith(key + " "):
            fail(i, f"expected '{key} ...', got {lines[i]!r}")
        return lines[i].split()[1:]

    samples = []
    i = 3
    while i < len(lines):
        if not lines[i].startswith("sample ") or len(lines[i].split()) != 2:
            fail(i, f"expected 'sample <id>', got {lines[i]!r}")
        sid = lines[i].split()[1]
        i += 1
        parts = lines[i].split() if i < len(lines) else []
        if len(parts) != 3 or parts[0] != "shape":
            fail(min(i, len(lines) - 1), "expected 'shape <T> <D_in>'")
        t_len, dim = int(parts[1]), int(parts[2])
        i += 1
        if i + t_len > len(lines):
            fail(len(lines) - 1, f"sample {sid}: file ends inside feature rows")
        frames = np.empty((t_len, dim))
        for r in range(t_len):
            vals = lines[i + r].split()
            if len(vals) != dim:
                fail(i + r, f"sample {sid}: expected {dim} values, got {len(vals)}")
            frames[r] = [float(v) for v in vals]
        i += t_len
        actions = action_vocab.encode(field_line(i, "labels"))
        i += 1
        caption = word_vocab.encode(field_line(i, "caption"))
        i += 1
        boundaries = []
        for item in field_line(i, "segments"):
            a, b, name = item.split(":")
            boundaries.append((int(a), int(b), action_vocab.encode([name])[0]))
        i += 1
        if i >= len(lines) or lines[i] != "end":
            fail(min(i, len(lines) - 1), "expected 'end'")
        i += 1
        samples.append(Sample(
            features=FeatureSequence(frames=frames, source_id=sid),
            actions=actions,
            caption=caption,
            boundaries=boundaries,
        ))
    return Dataset(samples=samples, action_vocab=action_vocab, word_vocab=word_vocab)


# ---------------------------------------------------------------------------
# External precomputed features
# ---------------------------------------------------------------------------

def load_external(feature_paths, labels_path, action_vocab: Vocabulary) -> List[Sample]:
    """Ingest precomputed per-video feature files plus a labels file.

    feature_paths may be one path or a list; each file holds one video and
    its id is the file stem. Samples come back with empty captions and
    boundaries. Dimension inconsistencies raise DataFormatError with the
    offending line; truncated files report the byte offset reached.
    """
    if isinstance(feature_paths, (str, os.PathLike)):
        feature_paths = [feature_paths]
    labels = {}
    with open(labels_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise DataFormatError(f"{labels_path}:{lineno}: expected '<video_id> <name> ...'")
            labels[parts[0]] = parts[1:]
    out = []
    for path in feature_paths:
        vid = os.path.splitext(os.path.basename(path))[0]
        if vid not in labels:
            raise DataFormatError(f"{labels_path}: no action sequence for video id {vid!r}")
        frames = _read_feature_file(path)
        out.append(Sample(
            features=FeatureSequence(frames=frames, source_id=vid),
            actions=action_vocab.encode(labels[vid]),
        ))
    return out


def _read_feature_file(path) -> np.ndarray:
    offset = 0
    with open(path, "rb") as f:
        header = f.readline()
        if not header:
            raise DataFormatError(f"{path}: truncated at byte offset 0: missing 'T D_in' header")
        offset += len(header)
        parts = header.split()
        if len(parts) != 2:
            raise DataFormatError(f"{path}:1: expected header 'T D_in'")
        t_len, dim = int(parts[0]), int(parts[1])
        if t_len < 1 or dim < 1:
            raise DataFormatError(f"{path}:1: T and D_in must be >= 1")
        frames = np.empty((t_len, dim))
        for r in range(t_len):
            line = f.readline()
            if not line:
                raise DataFormatError(
                    f"{path}: truncated at byte offset {offset}: expected {t_len} rows, got {r}"
                )
            offset += len(line)
            vals = line.split()
            if len(vals) != dim:
                raise DataFormatError(f"{path}:{r + 2}: expected {dim} values, got {len(vals)}")
            frames[r] = [float(v) for v in vals]
    return frames


def save_feature_file(path, frames: np.ndarray) -> None:
    frames = np.asarray(frames, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{frames.shape[0]} {frames.shape[1]}\n")
        for row in frames:
            f.write(_fmt_row(row) + "\n")
