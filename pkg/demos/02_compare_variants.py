#!/usr/bin/env python3
"""Compare the four model variants on one task with identical budgets.

The mean-pooling baseline discards temporal order, the plain sequence
LSTM must squeeze everything through its final state, the encoder-decoder
adds the translation protocol, and attention adds per-step alignment.
Expect the table to improve down the rows.
"""

import numpy as np

from actionseq.metrics import bleu, seq_item_accuracy
from actionseq.synthdata import SyntheticSpec, generate
from actionseq.train import TrainingConfig, default_decode_cap, train_model
from actionseq.translate import VARIANTS, build_model, translate

SEED = 7

spec = SyntheticSpec(n_classes=6, feature_dim=8, seed=SEED)
train_set = generate(spec, 600)
val_set = generate(spec, 150, start_index=5000)
test_set = generate(spec, 150, start_index=6000)
refs = [s.actions for s in test_set]
cap = default_decode_cap([s.actions for s in train_set])

print(f"{'model':<10} {'acc %':>7} {'BLEU-1':>7} {'BLEU-2':>7}")
for variant in VARIANTS:
    config = TrainingConfig.desk(seed=SEED, epochs=8)
    model = build_model(
        variant,
        n_classes=spec.n_classes,
        feature_dim=spec.feature_dim,
        hidden_dim=config.hidden_dim,
        embedding_dim=config.embedding_dim,
        rng=np.random.default_rng(SEED),
        num_layers=config.num_layers,
        max_decode_len=cap,
    )
    model, _ = train_model(model, train_set, val_set, config)
    preds = [translate(model, s.features).tokens for s in test_set]
    acc = float(np.mean([seq_item_accuracy(p, r) for p, r in zip(preds, refs)]))
    print(f"{variant:<10} {acc:>7.2f} {bleu(preds, refs, n=1).value:>7.2f} "
          f"{bleu(preds, refs, n=2).value:>7.2f}")
