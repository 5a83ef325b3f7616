"""Command-line entry point.

Commands: gen-data, train, eval, caption, localize, grad-check.
Configuration comes from flat keys in an optional JSON file (--config);
command-line flags override file values, which override the built-in
defaults. Every command is reproducible byte-for-byte from (config,
seed). Exit code is nonzero iff an error was reported.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from . import caption as caption_mod
from . import metrics, synthdata
from .localize import dump_grids, evaluate_localization, shuffled_baseline
from .localize import localize as localize_video
from .checks import THRESHOLD, gradient_gate
from .train import TrainingConfig, default_decode_cap, format_loss_log, train_model
from .translate import VARIANTS, build_model, load_model, save_model, translate

DEFAULTS: Dict[str, object] = {
    "seed": 0,
    "variant": "gru-aa",
    "out": "out",
    "data": None,
    "checkpoint": None,
    # synthetic dataset spec
    "classes": 10,
    "feature_dim": 16,
    "actions_min": 2,
    "actions_max": 5,
    "segment_min": 4,
    "segment_max": 10,
    "noise_sigma": 1.0,
    "prototype_separation": 8.0,
    "transition": "uniform",
    "train_count": 2000,
    "val_count": 500,
    "test_count": 500,
    # training
    "hidden_dim": 512,
    "embedding_dim": 512,
    "batch_size": 32,
    "epochs": 10,
    "learning_rate": 1e-3,
    "teacher_forcing_prob": 0.5,
    "patience": 3,
    "num_layers": 2,
    "per_step_forcing": False,
    # captioning
    "caption_pretrain_epochs": None,   # None: same as epochs
    "caption_joint_epochs": None,
    "normalize_scores": False,
    # localization
    "localize_rule": "attention-mass",
}

DESK_SCALE = {"hidden_dim": 64, "embedding_dim": 32, "batch_size": 8, "epochs": 10}

COMMANDS = ("gen-data", "train", "eval", "caption", "localize", "grad-check")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actionseq",
        description="Translate feature sequences into action sequences; caption and localize.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with flat config keys")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--variant", choices=VARIANTS, help="model variant")
        p.add_argument("--desk-scale", action="store_true",
                       help="laptop profile: hidden 64, embedding 32, batch 8, 10 epochs")
        p.add_argument("--out", help="output directory")
        p.add_argument("--data", help="dataset directory (train.txt/val.txt/test.txt)")
        p.add_argument("--checkpoint", help="model checkpoint path (eval/localize) or pipeline prefix (caption)")
    return parser


def resolve_config(args: argparse.Namespace) -> Dict[str, object]:
    cfg = dict(DEFAULTS)
    if args.config:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file {args.config!r} does not exist")
        with open(args.config, "r", encoding="utf-8") as f:
            user = json.load(f)
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(user)
    for key in ("seed", "variant", "out", "data", "checkpoint"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.desk_scale:
        cfg.update(DESK_SCALE)
    return cfg


def _synth_spec(cfg) -> synthdata.SyntheticSpec:
    return synthdata.SyntheticSpec(
        n_classes=cfg["classes"],
        feature_dim=cfg["feature_dim"],
        actions_min=cfg["actions_min"],
        actions_max=cfg["actions_max"],
        segment_min=cfg["segment_min"],
        segment_max=cfg["segment_max"],
        noise_sigma=cfg["noise_sigma"],
        prototype_separation=cfg["prototype_separation"],
        transition=cfg["transition"],
        seed=cfg["seed"],
    )


def _training_config(cfg) -> TrainingConfig:
    return TrainingConfig(
        hidden_dim=cfg["hidden_dim"],
        embedding_dim=cfg["embedding_dim"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"],
        teacher_forcing_prob=cfg["teacher_forcing_prob"],
        patience=cfg["patience"],
        seed=cfg["seed"],
        per_step_forcing=cfg["per_step_forcing"],
        num_layers=cfg["num_layers"],
    )


def _load_split(cfg, split: str) -> synthdata.Dataset:
    if not cfg["data"]:
        raise ValueError("--data DIR is required for this command")
    path = os.path.join(cfg["data"], f"{split}.txt")
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset file {path!r} does not exist")
    return synthdata.load_dataset(path)


def _outdir(cfg) -> str:
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


def _write_reports(path, reports: List[metrics.MetricReport]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(r.to_json() + "\n")
            print(r.to_json())


def cmd_gen_data(cfg) -> int:
    spec = _synth_spec(cfg)
    out = _outdir(cfg)
    counts = (cfg["train_count"], cfg["val_count"], cfg["test_count"])
    action_vocab, word_vocab = synthdata.build_vocabs(spec)
    start = 0
    for split, count in zip(("train", "val", "test"), counts):
        samples = synthdata.generate(spec, count, start_index=start)
        start += count
        path = os.path.join(out, f"{split}.txt")
        synthdata.save_dataset(path, samples, action_vocab, word_vocab)
        print(f"wrote {count} samples to {path}")
    action_vocab.save(os.path.join(out, "actions.vocab"))
    word_vocab.save(os.path.join(out, "words.vocab"))
    return 0


def cmd_train(cfg) -> int:
    train_ds = _load_split(cfg, "train")
    val_ds = _load_split(cfg, "val")
    out = _outdir(cfg)
    tc = _training_config(cfg)
    variant = cfg["variant"]
    cap = default_decode_cap([s.actions for s in train_ds.samples])
    model = build_model(
        variant,
        n_classes=train_ds.action_vocab.n_classes,
        feature_dim=train_ds.samples[0].features.dim,
        hidden_dim=tc.hidden_dim,
        embedding_dim=tc.embedding_dim,
        rng=np.random.default_rng(tc.seed),
        num_layers=tc.num_layers,
        max_decode_len=cap,
        vocab_hash=train_ds.action_vocab.content_hash(),
    )
    model, rows = train_model(model, train_ds.samples, val_ds.samples, tc)
    ckpt = os.path.join(out, f"model_{variant}.npz")
    save_model(model, ckpt)
    log_path = os.path.join(out, f"loss_log_{variant}.csv")
    with open(log_path, "w", encoding="utf-8") as f:
        f.write(format_loss_log(rows))
    last = rows[-1]
    print(f"trained {variant}: epoch {last.epoch} val_loss {last.val_loss:.4f} "
          f"val_bleu1 {last.val_bleu1:.2f}")
    print(f"checkpoint {ckpt}")
    print(f"loss log {log_path}")
    return 0


def _require_checkpoint(cfg) -> str:
    ckpt = cfg["checkpoint"]
    if not ckpt:
        raise ValueError("--checkpoint PATH is required for this command")
    if not os.path.exists(ckpt):
        raise FileNotFoundError(f"checkpoint {ckpt!r} does not exist")
    return ckpt


def cmd_eval(cfg) -> int:
    model = load_model(_require_checkpoint(cfg))
    test_ds = _load_split(cfg, "test")
    if model.vocab_hash and model.vocab_hash != test_ds.action_vocab.content_hash():
        raise ValueError("checkpoint was trained with a different action vocabulary")
    preds = [translate(model, s.features).tokens for s in test_ds.samples]
    refs = [s.actions for s in test_ds.samples]
    acc = float(np.mean([metrics.seq_item_accuracy(p, r) for p, r in zip(preds, refs)]))
    reports = [
        metrics.bleu(preds, refs, n=1),
        metrics.bleu(preds, refs, n=2),
        metrics.MetricReport(metric="seq_item_accuracy", value=acc, count=len(preds)),
    ]
    _write_reports(os.path.join(_outdir(cfg), f"metrics_{model.variant}.jsonl"), reports)
    return 0


def cmd_caption(cfg) -> int:
    train_ds = _load_split(cfg, "train")
    val_ds = _load_split(cfg, "val")
    test_ds = _load_split(cfg, "test")
    out = _outdir(cfg)
    tc = _training_config(cfg)
    prefix = cfg["checkpoint"]
    if prefix and os.path.exists(prefix + ".stage1.npz"):
        pipeline = caption_mod.load_pipeline(prefix + ".stage1.npz", prefix + ".stage2.npz",
                                             normalize_scores=cfg["normalize_scores"])
    else:
        pre_epochs = cfg["caption_pretrain_epochs"] or tc.epochs
        joint_epochs = cfg["caption_joint_epochs"] or tc.epochs
        pipeline = caption_mod.build_pipeline(
            n_action_classes=train_ds.action_vocab.n_classes,
            n_words=train_ds.word_vocab.n_classes,
            feature_dim=train_ds.samples[0].features.dim,
            hidden_dim=tc.hidden_dim,
            embedding_dim=tc.embedding_dim,
            rng=np.random.default_rng(tc.seed),
            max_action_len=default_decode_cap([s.actions for s in train_ds.samples]),
            max_caption_len=default_decode_cap([s.caption for s in train_ds.samples]),
            normalize_scores=cfg["normalize_scores"],
        )
        pipeline, _, _ = caption_mod.train_pipeline(
            pipeline, train_ds.samples, val_ds.samples,
            replace(tc, epochs=pre_epochs), replace(tc, epochs=joint_epochs),
        )
        caption_mod.save_pipeline(pipeline, os.path.join(out, "caption.stage1.npz"),
                                  os.path.join(out, "caption.stage2.npz"))
    word_vocab = test_ds.word_vocab
    cands, refs = [], []
    cap_path = os.path.join(out, "captions.tsv")
    with open(cap_path, "w", encoding="utf-8") as f:
        for s in test_ds.samples:
            words = caption_mod.generate_caption(pipeline, s.features)
            cands.append(words)
            refs.append(s.caption)
            f.write(s.features.source_id + "\t" + " ".join(word_vocab.decode(words)) + "\n")
    reports = [metrics.bleu(cands, refs, n=k) for k in (1, 2, 3, 4)]
    rouge = float(np.mean([metrics.rouge_l(c, r) for c, r in zip(cands, refs) if r]))
    reports.append(metrics.MetricReport(metric="rouge_l", value=rouge, count=len(cands)))
    _write_reports(os.path.join(out, "caption_metrics.jsonl"), reports)
    print(f"captions {cap_path}")
    return 0


def cmd_localize(cfg) -> int:
    model = load_model(_require_checkpoint(cfg))
    test_ds = _load_split(cfg, "test")
    out = _outdir(cfg)
    grids = [localize_video(model, s.features, rule=cfg["localize_rule"])
             for s in test_ds.samples]
    value = evaluate_localization(grids, test_ds.samples)
    shuffled = shuffled_baseline(grids, np.random.default_rng(cfg["seed"]))
    base = evaluate_localization(shuffled, test_ds.samples)
    dump_grids(grids, os.path.join(out, "grids.txt"))
    reports = [
        metrics.MetricReport(metric="frame_map", value=value, count=len(grids)),
        metrics.MetricReport(metric="frame_map_shuffled", value=base, count=len(grids)),
    ]
    _write_reports(os.path.join(out, "localization.jsonl"), reports)
    return 0


def cmd_grad_check(cfg) -> int:
    worst = 0.0
    for name, err in gradient_gate():
        print(f"{name}: max relative error {err:.3e}")
        worst = max(worst, err)
    if not np.isfinite(worst) or worst >= THRESHOLD:
        print(f"FAIL: worst error {worst:.3e} >= {THRESHOLD:.0e}", file=sys.stderr)
        return 1
    print(f"OK: all gradients within {THRESHOLD:.0e}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "eval": cmd_eval,
        "caption": cmd_caption,
        "localize": cmd_localize,
        "grad-check": cmd_grad_check,
    }
    try:
        cfg = resolve_config(args)
        return handlers[args.command](cfg)
    except (ValueError, KeyError, FileNotFoundError, synthdata.GenerationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
