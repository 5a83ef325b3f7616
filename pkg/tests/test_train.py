import numpy as np
import pytest

from actionseq.synthdata import SyntheticSpec, generate
from actionseq.train import (
    Adam,
    TrainingConfig,
    clip_global_norm,
    default_decode_cap,
    format_loss_log,
    sequence_loss,
    train_model,
)
from actionseq.translate import (
    GRU_AA,
    LSTM_ED,
    LSTM_MEAN,
    LSTM_SS,
    VARIANTS,
    FeatureSequence,
    build_model,
    get_flat_params,
    translate,
)


def _tiny_dataset(seed=0, count=30, **spec_kw):
    kw = dict(n_classes=3, feature_dim=2, actions_min=1, actions_max=3,
              segment_min=1, segment_max=3, noise_sigma=0.4,
              prototype_separation=4.0, seed=seed)
    kw.update(spec_kw)
    spec = SyntheticSpec(**kw)
    return generate(spec, count), generate(spec, max(count // 3, 4), start_index=10_000)


def _zeroed(variant, n_classes=3, feature_dim=2):
    model = build_model(variant, n_classes, feature_dim, 4, 3,
                        np.random.default_rng(0), max_decode_len=8)
    from actionseq.translate import set_flat_params
    set_flat_params(model, np.zeros(get_flat_params(model).size))
    return model


class TestSequenceLoss:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_uniform_scores_loss(self, variant):
        # zero parameters give all-zero scores, so each step costs ln(C + 3)
        model = _zeroed(variant)
        f = FeatureSequence(frames=np.random.default_rng(1).normal(size=(4, 2)))
        target = [0, 2, 1]
        loss, _ = sequence_loss(model, f, target, None)
        assert loss == pytest.approx((len(target) + 1) * np.log(6.0), rel=1e-12)

    def test_empty_target_single_eos_step(self):
        model = _zeroed(GRU_AA)
        f = FeatureSequence(frames=np.zeros((3, 2)))
        loss, _ = sequence_loss(model, f, [], None)
        assert loss == pytest.approx(np.log(6.0), rel=1e-12)

    def test_trailing_pad_ignored(self):
        model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(2), max_decode_len=8)
        f = FeatureSequence(frames=np.random.default_rng(3).normal(size=(4, 2)))
        plain, _ = sequence_loss(model, f, [1, 2], None)
        padded, _ = sequence_loss(model, f, [1, 2, model.pad, model.pad], None)
        assert padded == plain

    def test_non_class_target_rejected(self):
        model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(2), max_decode_len=8)
        f = FeatureSequence(frames=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            sequence_loss(model, f, [model.sos], None)

    def test_short_draws_rejected(self):
        model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(2), max_decode_len=8)
        f = FeatureSequence(frames=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            sequence_loss(model, f, [0, 1], [True])

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_fully_forced_loss_deterministic(self, variant):
        model = build_model(variant, 3, 2, 4, 3, np.random.default_rng(4), max_decode_len=8)
        f = FeatureSequence(frames=np.random.default_rng(5).normal(size=(5, 2)))
        a, _ = sequence_loss(model, f, [0, 1], None, want_grads=False)
        b, _ = sequence_loss(model, f, [0, 1], None, want_grads=False)
        assert a == b

    def test_loss_finite(self):
        rng = np.random.default_rng(6)
        for variant in VARIANTS:
            model = build_model(variant, 3, 2, 4, 3, rng, max_decode_len=8)
            f = FeatureSequence(frames=rng.normal(size=(4, 2)) * 5)
            loss, grads = sequence_loss(model, f, [2, 0, 1], [True, False, True, False])
            assert np.isfinite(loss)
            assert all(np.all(np.isfinite(g)) for g in grads.values())


class TestConfig:
    def test_desk_profile(self):
        tc = TrainingConfig.desk()
        assert (tc.hidden_dim, tc.embedding_dim, tc.batch_size, tc.epochs) == (64, 32, 8, 10)

    def test_full_scale_defaults(self):
        tc = TrainingConfig()
        assert (tc.hidden_dim, tc.embedding_dim, tc.batch_size, tc.epochs) == (512, 512, 32, 10)
        assert tc.learning_rate == pytest.approx(1e-3)
        assert tc.teacher_forcing_prob == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainingConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainingConfig(teacher_forcing_prob=1.5)
        with pytest.raises(ValueError):
            TrainingConfig(learning_rate=-1.0)

    def test_default_decode_cap(self):
        assert default_decode_cap([[1, 2, 3], [1]]) == 8
        assert default_decode_cap([]) == 2


class TestOptimizer:
    def test_zero_lr_no_change(self):
        adam = Adam(4)
        p = np.array([1.0, -2.0, 3.0, 0.5])
        out = adam.step(p, np.ones(4), 0.0)
        np.testing.assert_array_equal(out, p)

    def test_descends_quadratic(self):
        adam = Adam(2)
        p = np.array([5.0, -3.0])
        for _ in range(300):
            p = adam.step(p, p.copy(), 0.05)
        assert np.linalg.norm(p) < 0.1

    def test_clip(self):
        g = np.array([3.0, 4.0])
        clipped = clip_global_norm(g, 5.0)
        np.testing.assert_array_equal(clipped, g)
        clipped = clip_global_norm(2 * g, 5.0)
        assert np.linalg.norm(clipped) == pytest.approx(5.0)


class TestTraining:
    def test_zero_learning_rate_keeps_params(self):
        train_s, val_s = _tiny_dataset()
        model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(1), max_decode_len=8)
        before = get_flat_params(model)
        tc = TrainingConfig(hidden_dim=4, embedding_dim=3, batch_size=4, epochs=1,
                            learning_rate=0.0, seed=2)
        model, rows = train_model(model, train_s, val_s, tc)
        np.testing.assert_array_equal(get_flat_params(model), before)
        assert len(rows) == 1

    def test_same_seed_identical_logs(self):
        train_s, val_s = _tiny_dataset()

        def run():
            model = build_model(GRU_AA, 3, 2, 6, 4, np.random.default_rng(3), max_decode_len=8)
            tc = TrainingConfig(hidden_dim=6, embedding_dim=4, batch_size=4, epochs=3, seed=9)
            model, rows = train_model(model, train_s, val_s, tc)
            return format_loss_log(rows), get_flat_params(model)

        log1, p1 = run()
        log2, p2 = run()
        assert log1 == log2
        assert np.array_equal(p1, p2)
        assert log1.splitlines()[0] == "epoch,train_loss,val_loss,val_bleu1"

    def test_learning_reduces_val_loss(self):
        # the full-size check (>= 50% drop on the desk benchmark) lives in the
        # acceptance suite; this is the same property on a 100-sample task
        train_s, val_s = _tiny_dataset(count=100)
        model = build_model(GRU_AA, 3, 2, 16, 8, np.random.default_rng(4), max_decode_len=8)
        tc = TrainingConfig(hidden_dim=16, embedding_dim=8, batch_size=4, epochs=16, seed=5)
        model, rows = train_model(model, train_s, val_s, tc)
        best = min(r.val_loss for r in rows)
        assert best <= 0.5 * rows[0].val_loss

    def test_per_step_forcing_differs(self):
        train_s, val_s = _tiny_dataset()

        def run(per_step):
            model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(6), max_decode_len=8)
            tc = TrainingConfig(hidden_dim=4, embedding_dim=3, batch_size=4, epochs=2,
                                seed=7, per_step_forcing=per_step)
            model, rows = train_model(model, train_s, val_s, tc)
            return format_loss_log(rows)

        assert run(False) != run(True)

    def test_empty_dataset_rejected(self):
        train_s, val_s = _tiny_dataset()
        model = build_model(GRU_AA, 3, 2, 4, 3, np.random.default_rng(8), max_decode_len=8)
        tc = TrainingConfig(hidden_dim=4, embedding_dim=3, batch_size=4, epochs=1)
        with pytest.raises(ValueError):
            train_model(model, [], val_s, tc)
        with pytest.raises(ValueError):
            train_model(model, train_s, [], tc)

    def test_early_stopping_restores_best(self):
        train_s, val_s = _tiny_dataset(count=40)
        model = build_model(GRU_AA, 3, 2, 8, 4, np.random.default_rng(9), max_decode_len=8)
        tc = TrainingConfig(hidden_dim=8, embedding_dim=4, batch_size=4, epochs=12,
                            seed=10, patience=2)
        model, rows = train_model(model, train_s, val_s, tc)
        best_epoch = min(rows, key=lambda r: r.val_loss).epoch
        # no more than patience epochs beyond the best one were run
        assert rows[-1].epoch <= best_epoch + tc.patience
        # restored parameters reproduce the best validation loss
        from actionseq.train import sequence_loss as sl
        val = sum(sl(model, s.features, s.actions, None, want_grads=False)[0] for s in val_s) / len(val_s)
        assert val == pytest.approx(min(r.val_loss for r in rows), rel=1e-12)

    @pytest.mark.parametrize("variant", [LSTM_ED, LSTM_MEAN, LSTM_SS])
    def test_all_variants_train(self, variant):
        train_s, val_s = _tiny_dataset(count=20)
        model = build_model(variant, 3, 2, 6, 4, np.random.default_rng(11),
                            num_layers=2, max_decode_len=8)
        tc = TrainingConfig(hidden_dim=6, embedding_dim=4, batch_size=4, epochs=2, seed=12)
        model, rows = train_model(model, train_s, val_s, tc)
        assert len(rows) == 2
        assert all(np.isfinite(r.train_loss) and np.isfinite(r.val_loss) for r in rows)
        pred = translate(model, train_s[0].features)
        assert pred.step_scores.shape[1] == model.n_symbols
