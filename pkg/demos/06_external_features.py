#!/usr/bin/env python3
"""Ingest externally precomputed feature files instead of synthetic data.

Any upstream feature extractor can feed this package: one text file per
video ("T D_in" header, then T rows of decimals) plus a labels file
mapping video ids to action-name sequences. Here we fake the "external"
files from the synthetic generator, round-trip them through the ingest
path, and translate with a model trained on synthetic data.
"""

import pathlib
import tempfile

import numpy as np

from actionseq.synthdata import (
    SyntheticSpec,
    build_vocabs,
    generate,
    load_external,
    save_feature_file,
)
from actionseq.train import TrainingConfig, default_decode_cap, train_model
from actionseq.translate import build_model, translate

SEED = 7

spec = SyntheticSpec(n_classes=6, feature_dim=8, seed=SEED)
train_set = generate(spec, 400)
val_set = generate(spec, 80, start_index=5000)
action_vocab, _ = build_vocabs(spec)

model = build_model("gru-aa", spec.n_classes, spec.feature_dim, 64, 32,
                    np.random.default_rng(SEED),
                    max_decode_len=default_decode_cap([s.actions for s in train_set]))
model, _ = train_model(model, train_set, val_set, TrainingConfig.desk(seed=SEED, epochs=6))

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    clips = generate(spec, 5, start_index=9000)
    feature_paths = []
    label_lines = []
    for i, clip in enumerate(clips):
        path = tmp / f"clip{i}.txt"
        save_feature_file(path, clip.features.frames)
        feature_paths.append(path)
        label_lines.append(f"clip{i} " + " ".join(action_vocab.decode(clip.actions)))
    labels_path = tmp / "labels.txt"
    labels_path.write_text("\n".join(label_lines) + "\n")

    samples = load_external(feature_paths, labels_path, action_vocab)
    print(f"ingested {len(samples)} videos from feature files")
    for s in samples:
        pred = translate(model, s.features)
        print(f"{s.features.source_id}: truth {action_vocab.decode(s.actions)} "
              f"-> predicted {action_vocab.decode(pred.tokens)}")
