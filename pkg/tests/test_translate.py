import numpy as np
import pytest

from actionseq.cells import LstmCellParams
from actionseq.translate import (
    GRU_AA,
    LSTM_ED,
    LSTM_MEAN,
    LSTM_SS,
    VARIANTS,
    FeatureSequence,
    attention,
    build_model,
    context_vector,
    decode_greedy,
    encode,
    forward_baseline,
    get_flat_params,
    greedy_token,
    load_model,
    param_items,
    save_model,
    set_flat_params,
    translate,
)

from oracles import attention_oracle, gru_aa_decode_oracle


def _model(variant, seed=0, **kw):
    args = dict(n_classes=4, feature_dim=3, hidden_dim=5, embedding_dim=4,
                rng=np.random.default_rng(seed), max_decode_len=8)
    args.update(kw)
    return build_model(variant, **args)


def _features(seed=0, t_len=6, dim=3):
    rng = np.random.default_rng(seed)
    return FeatureSequence(frames=rng.normal(size=(t_len, dim)), source_id=f"v{seed}")


class TestFeatureSequence:
    def test_validation(self):
        with pytest.raises(ValueError):
            FeatureSequence(frames=np.zeros((0, 3)))
        with pytest.raises(ValueError):
            FeatureSequence(frames=np.array([[np.inf, 0.0]]))
        with pytest.raises(ValueError):
            FeatureSequence(frames=np.zeros(4))


class TestEncode:
    def test_single_frame(self):
        model = _model(GRU_AA)
        enc = encode(model, _features(t_len=1))
        assert enc.states.shape == (1, 5)
        np.testing.assert_array_equal(enc.states[0], enc.final_hidden)

    def test_zero_lstm_encoder(self):
        model = _model(LSTM_ED)
        model.encoder = LstmCellParams.zeros(3, 5)
        enc = encode(model, FeatureSequence(frames=np.zeros((4, 3))))
        np.testing.assert_array_equal(enc.final_hidden, np.zeros(5))
        np.testing.assert_array_equal(enc.final_cell, np.zeros(5))

    def test_deterministic(self):
        model = _model(GRU_AA, seed=2)
        f = _features(seed=3)
        a = encode(model, f)
        b = encode(model, f)
        assert np.array_equal(a.states, b.states)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            encode(_model(LSTM_ED), _features(dim=4))

    def test_baselines_have_no_encoder(self):
        with pytest.raises(ValueError):
            encode(_model(LSTM_MEAN), _features())


class TestAttention:
    def test_single_state(self):
        model = _model(GRU_AA)
        alpha = attention(np.ones((1, 5)), np.zeros(5), model)
        np.testing.assert_allclose(alpha, [1.0])

    def test_identical_states_uniform(self):
        model = _model(GRU_AA, seed=1)
        states = np.tile(np.linspace(-1, 1, 5), (7, 1))
        alpha = attention(states, np.ones(5) * 0.3, model)
        np.testing.assert_allclose(alpha, np.full(7, 1 / 7), atol=1e-12)

    def test_matches_straight_line_oracle(self):
        model = _model(GRU_AA, seed=5)
        rng = np.random.default_rng(8)
        for _ in range(10):
            states = rng.normal(size=(6, 5))
            h_dec = rng.normal(size=5)
            got = attention(states, h_dec, model)
            want = attention_oracle(states, h_dec, model.w_att, model.v_att)
            np.testing.assert_allclose(got, want, atol=1e-12)
            assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_wrong_variant(self):
        with pytest.raises(ValueError):
            attention(np.ones((2, 5)), np.zeros(5), _model(LSTM_ED))


class TestContextVector:
    def test_one_hot_selects_state(self):
        rng = np.random.default_rng(0)
        states = rng.normal(size=(4, 5))
        alpha = np.zeros(4)
        alpha[2] = 1.0
        np.testing.assert_array_equal(context_vector(states, alpha), states[2])

    def test_cancellation(self):
        v = np.arange(5.0)
        states = np.stack([v, -v])
        np.testing.assert_allclose(context_vector(states, np.array([0.5, 0.5])), np.zeros(5), atol=1e-16)

    def test_random_weighted_sum(self):
        rng = np.random.default_rng(1)
        states = rng.normal(size=(6, 4))
        alpha = rng.dirichlet(np.ones(6))
        want = sum(alpha[j] * states[j] for j in range(6))
        np.testing.assert_allclose(context_vector(states, alpha), want, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            context_vector(np.ones((3, 2)), np.ones(2))


class TestGreedyToken:
    def test_never_sos_or_pad(self):
        n_classes = 4
        scores = np.zeros(7)
        scores[4] = 100.0  # SOS
        scores[6] = 99.0   # PAD
        tok = greedy_token(scores, n_classes)
        assert tok not in (4, 6)

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            scores = rng.normal(size=7)
            assert greedy_token(scores, 4) == greedy_token(scores + 123.456, 4)

    def test_tie_breaks_to_lowest_id(self):
        scores = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert greedy_token(scores, 4) == 0


class TestDecodeGreedy:
    def test_immediate_eos_gives_empty(self):
        # find a seeded model whose first step tops out at EOS
        f = _features(seed=4)
        for seed in range(200):
            model = _model(GRU_AA, seed=seed)
            pred = translate(model, f)
            if not pred.tokens:
                assert pred.step_scores.shape[0] == 1
                assert pred.attention.weights.shape == (f.length, 1)
                break
        else:
            pytest.fail("no immediate-EOS model found in 200 seeds")

    def test_cap_of_one(self):
        f = _features(seed=4)
        for seed in range(200):
            model = _model(GRU_AA, seed=seed)
            if translate(model, f).tokens:
                pred = translate(model, f, max_decode_len=1)
                assert len(pred.tokens) == 1
                assert pred.step_scores.shape[0] == 1
                break

    def test_never_reserved_tokens_and_cap(self):
        for seed in range(12):
            model = _model(GRU_AA, seed=seed)
            pred = translate(model, _features(seed=seed + 100))
            assert len(pred.tokens) <= model.max_decode_len
            for t in pred.tokens:
                assert 0 <= t < model.n_classes or t == model.eos
                assert t not in (model.sos, model.pad)

    def test_attention_columns_are_distributions(self):
        model = _model(GRU_AA, seed=9)
        pred = translate(model, _features(seed=10))
        w = pred.attention.weights
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=0), np.ones(w.shape[1]), atol=1e-6)

    def test_replay_matches_independent_oracle(self):
        for seed in range(8):
            model = _model(GRU_AA, seed=seed)
            f = _features(seed=seed + 50, t_len=5)
            pred = translate(model, f)
            tokens, scores, alphas = gru_aa_decode_oracle(model, f.frames, model.max_decode_len)
            assert pred.tokens == tokens
            np.testing.assert_allclose(pred.step_scores, scores, atol=1e-12)
            np.testing.assert_allclose(pred.attention.weights, alphas, atol=1e-12)

    def test_lstm_ed_no_attention(self):
        pred = translate(_model(LSTM_ED, seed=3), _features(seed=3))
        assert pred.attention is None

    def test_cap_validation(self):
        model = _model(GRU_AA)
        with pytest.raises(ValueError):
            decode_greedy(model, encode(model, _features()), max_decode_len=0)


class TestBaselines:
    def test_mean_pooling_is_temporal_mean(self):
        # a constant sequence and its single-frame version decode identically
        model = _model(LSTM_MEAN, seed=6)
        row = np.linspace(-1, 1, 3)
        const = FeatureSequence(frames=np.tile(row, (7, 1)))
        single = FeatureSequence(frames=row.reshape(1, 3))
        a = forward_baseline(model, const)
        b = forward_baseline(model, single)
        assert a.tokens == b.tokens
        np.testing.assert_array_equal(a.step_scores, b.step_scores)

    def test_deterministic_repeat(self):
        for variant in (LSTM_MEAN, LSTM_SS):
            model = _model(variant, seed=7)
            f = _features(seed=8)
            a = forward_baseline(model, f)
            b = forward_baseline(model, f)
            assert a.tokens == b.tokens
            assert np.array_equal(a.step_scores, b.step_scores)

    def test_wrong_variant_rejected(self):
        with pytest.raises(ValueError):
            forward_baseline(_model(GRU_AA), _features())

    def test_lstm_ss_embeds_into_feature_dim(self):
        model = _model(LSTM_SS)
        assert model.w_emb.shape == (model.n_symbols, model.feature_dim)

    def test_stacking_depth(self):
        model = _model(LSTM_MEAN, num_layers=3)
        assert len(model.layers) == 3
        assert model.layers[1].input_dim == model.hidden_dim


class TestCheckpoints:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_bit_exact_round_trip(self, variant, tmp_path):
        model = _model(variant, seed=11)
        model.vocab_hash = "abc123"
        path = tmp_path / "model.npz"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.variant == model.variant
        assert loaded.vocab_hash == "abc123"
        assert loaded.max_decode_len == model.max_decode_len
        for (n1, a1), (n2, a2) in zip(param_items(model), param_items(loaded)):
            assert n1 == n2
            assert np.array_equal(a1, a2)
        f = _features(seed=12)
        assert translate(model, f).tokens == translate(loaded, f).tokens

    def test_checkpoint_bytes_deterministic(self, tmp_path):
        model = _model(GRU_AA, seed=13)
        p1, p2 = tmp_path / "a.npz", tmp_path / "b.npz"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestFlatParams:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_round_trip(self, variant):
        model = _model(variant, seed=14)
        vec = get_flat_params(model)
        other = _model(variant, seed=15)
        assert not np.array_equal(get_flat_params(other), vec)
        set_flat_params(other, vec)
        np.testing.assert_array_equal(get_flat_params(other), vec)
        f = _features(seed=16)
        assert translate(model, f).tokens == translate(other, f).tokens

    def test_size_mismatch(self):
        model = _model(GRU_AA)
        with pytest.raises(ValueError):
            set_flat_params(model, np.zeros(3))
