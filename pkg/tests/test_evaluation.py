import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triwin.errors import DegenerateDenominator, EmptyTestClass, MissingEntry
from triwin.evaluation import (Confusion, average_ranks, derive_seed, f_critical,
                               format_mean_std, friedman, g_means, grid_axes, grid_search_cv,
                               make_algorithm, nemenyi_cd, q_alpha, rank_statistics)
from triwin.synthetic import gaussian_blobs

LOW_IR_RANKS = [5.72, 4.14, 5.26, 4.84, 4.94, 5.72, 4.00, 1.38]
MEDIUM_IR_RANKS = [5.88, 4.34, 4.73, 4.50, 4.69, 4.53, 5.73, 1.57]
HIGH_IR_RANKS = [6.83, 5.44, 4.66, 3.66, 4.16, 4.44, 5.55, 1.22]


class TestMetrics:
    def test_perfect(self):
        assert g_means(Confusion.from_labels([1, -1, -1], [1, -1, -1])) == 1.0

    def test_all_positive_prediction(self):
        assert g_means(Confusion.from_labels([1, -1], [1, 1])) == 0.0

    def test_known_product(self):
        c = Confusion(81, 19, 64, 36)
        assert g_means(c) == pytest.approx(0.72, abs=1e-12)

    def test_empty_test_class(self):
        with pytest.raises(EmptyTestClass):
            Confusion.from_labels([-1, -1], [-1, 1]).sensitivity

    @given(tp=st.integers(0, 50), fn=st.integers(0, 50), tn=st.integers(0, 50), fp=st.integers(0, 50))
    def test_range_and_diagonal(self, tp, fn, tn, fp):
        if tp + fn == 0 or tn + fp == 0:
            return
        g = g_means(Confusion(tp, fn, tn, fp))
        assert 0.0 <= g <= 1.0
        assert (g == 1.0) == (fn == 0 and fp == 0)

    def test_format(self):
        assert format_mean_std([1.0, 1.0]) == "100.00±00.00"
        assert format_mean_std([0.5, 0.7]) == "60.00±10.00"


class TestGrids:
    def test_sizes(self):
        axes = grid_axes("full")
        assert len(make_algorithm("svm").grid(axes)) == 32
        assert len(make_algorithm("twftsvm").grid(axes)) == 784
        assert len(make_algorithm("tsvm").grid(axes)) == 196

    def test_override(self):
        axes = grid_axes('{"base": "quick", "C": [3]}')
        assert axes["C"] == (3,) and axes["sigma2"] == (0.1, 1.0)

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            grid_axes({"gamma": [1]})

    def test_unknown_algorithm_lists_names(self):
        with pytest.raises(ValueError, match="twftsvm"):
            make_algorithm("xgboost")


class TestGridSearch:
    def test_single_config(self):
        ds = gaussian_blobs(10, 40, seed=1)
        cfg = [dict(sigma2=1.0, C=2.0)]
        res = grid_search_cv(ds, "svm", cfg, folds=5, seed=0)
        assert res.best.params == cfg[0] and res.best_index == 0
        assert len(res.records) == 5

    def test_deterministic(self):
        ds = gaussian_blobs(10, 40, separation=2.0, seed=2)
        a = grid_search_cv(ds, "twftsvm", "quick", folds=4, seed=9)
        b = grid_search_cv(ds, "twftsvm", "quick", folds=4, seed=9)
        assert repr(a) == repr(b)

    def test_parallel_matches_serial(self):
        ds = gaussian_blobs(10, 40, separation=2.0, seed=3)
        a = grid_search_cv(ds, "smote-svm", "quick", folds=3, seed=1, workers=1)
        b = grid_search_cv(ds, "smote-svm", "quick", folds=3, seed=1, workers=2)
        assert repr(a) == repr(b)

    def test_failures_score_zero(self):
        ds = gaussian_blobs(6, 30, seed=4)
        # smote with k=5 needs 6 training positives; 3 folds leave only 4
        alg = make_algorithm("smote-svm")
        res = grid_search_cv(ds, alg, [dict(sigma2=1.0, C=1.0)], folds=3, seed=0)
        assert res.failures == 0   # k shrinks to fit the fold

    def test_seed_derivation_stable(self):
        assert derive_seed(0, "a", 1) == derive_seed(0, "a", 1) != derive_seed(0, "a", 2)
        assert 0 <= derive_seed(2**63, "x") < 2**64


class TestRanks:
    def test_simple(self):
        assert average_ranks([[0.9, 0.8, 0.7]]).ranks.tolist() == [[1, 2, 3]]

    def test_ties(self):
        assert average_ranks([[0.9, 0.9, 0.7]]).ranks.tolist() == [[1.5, 1.5, 3]]

    def test_hand_ranked_table(self):
        t = average_ranks([[0.9, 0.5, 0.7], [0.6, 0.6, 0.8], [0.1, 0.3, 0.2]])
        np.testing.assert_allclose(t.average_ranks, [(1 + 2.5 + 3) / 3, (3 + 2.5 + 1) / 3,
                                                     (2 + 1 + 2) / 3])

    def test_missing_cell(self):
        with pytest.raises(MissingEntry):
            average_ranks([[0.9, np.nan]])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.sampled_from([0.1, 0.5, 0.7, 0.9]), min_size=4, max_size=4),
                    min_size=2, max_size=8))
    def test_row_sums(self, rows):
        t = average_ranks(rows)
        np.testing.assert_allclose(t.ranks.sum(axis=1), 4 * 5 / 2)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        S = rng.random((6, 5))
        perm = rng.permutation(5)
        a, b = average_ranks(S), average_ranks(S[:, perm])
        np.testing.assert_allclose(b.average_ranks, a.average_ranks[perm])
        ta, fa = friedman(a.average_ranks, 6)
        tb, fb = friedman(b.average_ranks, 6)
        assert ta == pytest.approx(tb) and fa == pytest.approx(fb)


class TestFriedman:
    def test_low_ir(self):
        tau, ff = friedman(LOW_IR_RANKS, 25)
        assert tau == pytest.approx(58.24, abs=0.005)
        assert ff == pytest.approx(11.97, abs=0.005)

    def test_equal_ranks(self):
        assert friedman([2.0, 2.0, 2.0], 10)[0] == pytest.approx(0.0, abs=1e-12)

    def test_medium_ir_against_own_arithmetic(self):
        r = MEDIUM_IR_RANKS
        tau_ref = 12 * 13 / 72 * (sum(v * v for v in r) - 8 * 81 / 4)
        tau, ff = friedman(r, 13)
        assert tau == pytest.approx(tau_ref, rel=1e-12)
        assert ff == pytest.approx(12 * tau_ref / (13 * 7 - tau_ref), rel=1e-12)

    def test_high_ir_uses_explicit_n(self):
        a, _ = friedman(HIGH_IR_RANKS, 7)
        b, _ = friedman(HIGH_IR_RANKS, 9)
        assert a == pytest.approx(b * 7 / 9)

    def test_degenerate_denominator(self):
        with pytest.raises(DegenerateDenominator):
            friedman([1.0, 2.0], 4)

    @given(st.lists(st.floats(1, 8), min_size=2, max_size=10), st.integers(2, 40))
    def test_nonnegative_for_mean_preserving_ranks(self, r, n):
        k = len(r)
        r = np.asarray(r) - np.mean(r) + (k + 1) / 2
        s = 12 * n / (k * (k + 1)) * (np.sum(r * r) - k * (k + 1) ** 2 / 4)
        if math.isclose(s, n * (k - 1)):
            return
        assert friedman(r, n)[0] >= -1e-9


class TestNemenyi:
    @pytest.mark.parametrize("n,cd", [(25, 1.93), (13, 2.67), (9, 3.21)])
    def test_published(self, n, cd):
        assert nemenyi_cd(2.78, 8, n) == pytest.approx(cd, abs=0.005)

    def test_q_table(self):
        assert q_alpha(8) == pytest.approx(2.78, abs=0.001)
        with pytest.raises(ValueError):
            q_alpha(11)

    def test_critical_f_sources(self):
        assert f_critical(8, 25) == (1.93, "published")
        value, src = f_critical(3, 10, 0.05)
        assert src == "F-quantile" and value == pytest.approx(3.5546, abs=1e-3)

    def test_report(self):
        rep = rank_statistics(LOW_IR_RANKS, [f"a{i}" for i in range(8)], 25)
        assert rep.reject
        assert rep.cd == pytest.approx(1.93, abs=0.005)
        sig = {(a, b): s for a, b, _, s in rep.pairs}
        assert sig[("a6", "a7")]          # 4.00 - 1.38 = 2.62 > 1.93
        assert not sig[("a0", "a5")]      # equal ranks
        text = rep.render()
        assert "58.24" in text and "11.97" in text and "1.93" in text
