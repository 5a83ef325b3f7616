import json

import numpy as np
import pytest

from actionseq.metrics import MetricReport, bleu, frame_map, rouge_l, seq_item_accuracy

from oracles import average_precision_oracle, bleu_oracle


class TestBleu:
    def test_perfect_match(self):
        for n in (1, 2, 3):
            assert bleu([[1, 2, 3]], [[1, 2, 3]], n=n).value == pytest.approx(100.0)

    def test_clipped_unigram_example(self):
        # candidate a b a c vs reference a b a: clipped unigrams 3/4, BP 1
        cand = [["a", "b", "a", "c"]]
        ref = [["a", "b", "a"]]
        assert bleu(cand, ref, n=1).value == pytest.approx(75.0)
        # bigram precision 2/3, sqrt(0.75 * 2/3) = sqrt(0.5)
        assert bleu(cand, ref, n=2).value == pytest.approx(100.0 * np.sqrt(0.5), abs=5e-3)
        assert bleu(cand, ref, n=2).value == pytest.approx(70.71, abs=5e-3)

    def test_brevity_penalty(self):
        # shorter candidate: BP = exp(1 - 3/2)
        r = bleu([[1, 2]], [[1, 2, 3]], n=1)
        assert r.value == pytest.approx(100.0 * np.exp(1 - 3 / 2))

    def test_zero_precision_gives_zero(self):
        assert bleu([[1]], [[2]], n=1).value == 0.0
        assert bleu([[1]], [[1]], n=2).value == 0.0  # no bigrams at all

    def test_oracle_equivalence_seeded(self):
        rng = np.random.default_rng(1234)
        for trial in range(100):
            n_pairs = int(rng.integers(1, 6))
            cands, refs = [], []
            for _ in range(n_pairs):
                cands.append(list(rng.integers(0, 5, size=rng.integers(1, 9))))
                refs.append(list(rng.integers(0, 5, size=rng.integers(1, 9))))
            for order in (1, 2):
                assert bleu(cands, refs, n=order).value == pytest.approx(
                    bleu_oracle(cands, refs, order), abs=1e-9
                )

    def test_corpus_permutation_invariance(self):
        rng = np.random.default_rng(9)
        cands = [list(rng.integers(0, 4, size=5)) for _ in range(6)]
        refs = [list(rng.integers(0, 4, size=5)) for _ in range(6)]
        base = bleu(cands, refs, n=2).value
        perm = rng.permutation(6)
        shuffled = bleu([cands[i] for i in perm], [refs[i] for i in perm], n=2).value
        assert shuffled == pytest.approx(base, abs=1e-12)

    def test_sentence_level_flag(self):
        cands = [[1, 2], [3]]
        refs = [[1, 2], [4]]
        per_pair = [bleu([c], [r], n=1).value for c, r in zip(cands, refs)]
        assert bleu(cands, refs, n=1, corpus_level=False).value == pytest.approx(np.mean(per_pair))

    def test_errors(self):
        with pytest.raises(ValueError):
            bleu([[1]], [[1], [2]], n=1)
        with pytest.raises(ValueError):
            bleu([], [], n=1)
        with pytest.raises(ValueError):
            bleu([[1]], [[1]], n=0)

    def test_report_shape(self):
        r = bleu([[1]], [[1]], n=1)
        assert isinstance(r, MetricReport)
        parsed = json.loads(r.to_json())
        assert parsed == {"metric": "bleu1", "value": 100.0, "count": 1}


class TestSeqItemAccuracy:
    def test_longer_prediction(self):
        assert seq_item_accuracy(["a", "b", "a", "c"], ["a", "b", "a"]) == pytest.approx(75.0)

    def test_shorter_prediction(self):
        assert seq_item_accuracy(["a", "b"], ["a", "b", "a"]) == pytest.approx(66.67, abs=0.01)

    def test_shifted_prediction(self):
        assert seq_item_accuracy(["b", "a", "b", "a"], ["a", "b", "a"]) == 0.0

    def test_both_empty(self):
        assert seq_item_accuracy([], []) == 100.0

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = list(rng.integers(0, 3, size=rng.integers(0, 6)))
            g = list(rng.integers(0, 3, size=rng.integers(0, 6)))
            v = seq_item_accuracy(p, g)
            assert 0.0 <= v <= 100.0


class TestRougeL:
    def test_identical(self):
        assert rouge_l([1, 2, 3], [1, 2, 3]) == pytest.approx(100.0)

    def test_disjoint(self):
        assert rouge_l([1, 2], [3, 4]) == 0.0

    def test_computed_example(self):
        # cand (a, x, b) vs ref (a, b): LCS 2, P = 2/3, R = 1, beta = 1.2
        p, r, b2 = 2 / 3, 1.0, 1.44
        expected = 100.0 * (1 + b2) * p * r / (r + b2 * p)
        assert rouge_l(["a", "x", "b"], ["a", "b"]) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(82.993197, abs=1e-5)

    def test_empty_candidate(self):
        assert rouge_l([], [1]) == 0.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            rouge_l([1], [])

    def test_order_sensitivity(self):
        assert rouge_l([2, 1], [1, 2]) < 100.0


class TestFrameMap:
    def test_perfect_ranking(self):
        labels = np.zeros((6, 2), dtype=bool)
        labels[0, 0] = labels[3, 1] = True
        assert frame_map(labels.astype(float), labels) == pytest.approx(100.0)

    def test_positives_ranked_last(self):
        # one class, P positives at the bottom of N frames:
        # AP = mean_k k / (N - P + k)
        n, p = 10, 3
        scores = np.arange(n, dtype=float)[::-1].reshape(-1, 1)
        labels = np.zeros((n, 1), dtype=bool)
        labels[-p:, 0] = True
        expected = np.mean([k / (n - p + k) for k in range(1, p + 1)])
        assert frame_map(scores, labels) == pytest.approx(100.0 * expected)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            scores = rng.normal(size=(12, 3))
            labels = rng.random((12, 3)) < 0.3
            if not labels.any():
                continue
            aps = []
            for c in range(3):
                if labels[:, c].any():
                    aps.append(average_precision_oracle(list(scores[:, c]), list(labels[:, c])))
            assert frame_map(scores, labels) == pytest.approx(100.0 * np.mean(aps), abs=1e-12)

    def test_monte_carlo_random_scores(self):
        # with random scores, mean AP approaches the positive rate; the
        # finite-N bias of random-ranking AP decays with N, so test large N
        rng = np.random.default_rng(11)
        rate = 0.3
        n = 2000
        values = []
        for _ in range(300):
            scores = rng.normal(size=(n, 1))
            labels = rng.random((n, 1)) < rate
            if labels.any():
                values.append(frame_map(scores, labels))
        mean = np.mean(values)
        assert abs(mean - 100.0 * rate) < 0.6

    def test_zero_positive_class_skipped(self):
        scores = np.array([[1.0, 0.2], [0.5, 0.9]])
        labels = np.array([[True, False], [False, False]])
        assert frame_map(scores, labels) == pytest.approx(100.0)

    def test_no_positives_rejected(self):
        with pytest.raises(ValueError):
            frame_map(np.ones((3, 2)), np.zeros((3, 2), dtype=bool))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            frame_map(np.ones((3, 2)), np.zeros((3, 3), dtype=bool))
