import math

import numpy as np
import pytest

from riskcross.stats import (
    Result,
    RunOutcome,
    align_outcomes,
    binary_matrix,
    bonferroni,
    cochran_q,
    mcnemar,
    paired_t,
    rm_anova,
    summarize,
)


def outcome(i, result, time=None):
    return RunOutcome(i, result, time)


class TestSummarize:
    def test_all_success(self):
        s = summarize([outcome(i, Result.SUCCESS, 4.0) for i in range(10)])
        assert (s.success_rate, s.collision_rate, s.max_time_rate) == (100.0, 0.0, 0.0)
        assert s.mean_crossing_time == pytest.approx(4.0)

    def test_mixed_rates(self):
        s = summarize(
            [
                outcome(0, Result.SUCCESS, 4.0),
                outcome(1, Result.SUCCESS, 6.0),
                outcome(2, Result.COLLISION),
                outcome(3, Result.MAX_TIME),
            ]
        )
        assert (s.success_rate, s.collision_rate, s.max_time_rate) == (50.0, 25.0, 25.0)
        assert s.mean_crossing_time == pytest.approx(5.0)

    def test_rates_sum_to_hundred(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            outcomes = []
            for i in range(int(rng.integers(1, 40))):
                r = [Result.SUCCESS, Result.COLLISION, Result.MAX_TIME][int(rng.integers(3))]
                outcomes.append(outcome(i, r, 4.0 if r is Result.SUCCESS else None))
            s = summarize(outcomes)
            assert s.success_rate + s.collision_rate + s.max_time_rate == pytest.approx(100.0)

    def test_no_success_means_absent_time(self):
        s = summarize([outcome(0, Result.COLLISION), outcome(1, Result.MAX_TIME)])
        assert s.mean_crossing_time is None

    def test_crossing_time_only_counts_successes(self):
        # a non-success row cannot even carry a time; the mean is over successes
        with pytest.raises(ValueError):
            RunOutcome(0, Result.COLLISION, crossing_time=9.9)
        base = [outcome(0, Result.SUCCESS, 4.0), outcome(1, Result.COLLISION)]
        more = base + [outcome(2, Result.MAX_TIME)]
        assert summarize(base).mean_crossing_time == summarize(more).mean_crossing_time

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])


class TestCochranQ:
    def test_identical_columns(self):
        m = np.tile(np.array([[1], [0], [1], [1]]), (1, 3))
        res = cochran_q(m)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_hand_pinned_6x3(self):
        # column sums 5, 3, 2; row sums 2,1,3,0,2,2 -> Q = 3.5 by direct
        # evaluation of the formula; p = exp(-1.75) from chi-square with 2 dof
        m = np.array(
            [[1, 1, 0], [1, 0, 0], [1, 1, 1], [0, 0, 0], [1, 0, 1], [1, 1, 0]]
        )
        res = cochran_q(m)
        assert res.statistic == pytest.approx(3.5, abs=1e-12)
        assert res.p_value == pytest.approx(math.exp(-1.75), abs=1e-10)

    def test_two_treatments_equals_uncorrected_mcnemar(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = rng.integers(0, 2, size=(30, 2))
            b = int(((m[:, 0] == 1) & (m[:, 1] == 0)).sum())
            c = int(((m[:, 0] == 0) & (m[:, 1] == 1)).sum())
            res = cochran_q(m)
            if b + c == 0:
                assert res.p_value == 1.0
            else:
                assert res.statistic == pytest.approx((b - c) ** 2 / (b + c), abs=1e-9)

    def test_validates_entries(self):
        with pytest.raises(ValueError):
            cochran_q(np.array([[0, 2], [1, 0]]))


class TestMcnemar:
    def test_hand_value(self):
        # b=10 discordant one way, c=2 the other: chi2 = (8-1)^2 / 12
        a = np.array([1] * 10 + [0] * 2 + [1] * 5 + [0] * 5)
        b = np.array([0] * 10 + [1] * 2 + [1] * 5 + [0] * 5)
        res = mcnemar(a, b)
        assert res.statistic == pytest.approx(49 / 12, abs=1e-9)

    def test_balanced_discordance_large_p(self):
        a = np.array([1, 1, 0, 0, 1, 0])
        b = np.array([0, 0, 1, 1, 1, 0])
        res = mcnemar(a, b)
        assert res.statistic <= 0.25
        assert res.p_value > 0.5

    def test_no_discordant_pairs(self):
        a = np.array([1, 0, 1])
        res = mcnemar(a, a.copy())
        assert res.p_value == 1.0
        assert res.degenerate

    def test_symmetric_in_label_swap(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            a = rng.integers(0, 2, 40)
            b = rng.integers(0, 2, 40)
            assert mcnemar(a, b).statistic == pytest.approx(mcnemar(b, a).statistic)


class TestAnovaAndT:
    def test_identical_columns_anova(self):
        m = np.tile(np.array([[1.0], [2.0], [3.0]]), (1, 4))
        res = rm_anova(m)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_paired_t_identical(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        res = paired_t(a, a.copy())
        assert res.statistic == 0.0
        assert res.p_value == 1.0
        assert res.degenerate

    def test_paired_t_constant_shift_flag(self):
        a = np.array([2.0, 3.0, 4.0, 5.0])
        res = paired_t(a, a - 1.0)
        assert math.isinf(res.statistic)
        assert res.p_value == 0.0
        assert res.degenerate

    def test_textbook_5x2_pinned(self):
        # differences [2,1,2,1,1]: mean 1.4, sd sqrt(0.3), t = 5.715476.
        # Two-sided p = I_x(2, 1/2) at x = 4/(4+t^2) = 0.109091; the
        # incomplete beta has the closed form
        # (2 - 2 sqrt(1-x) + (2/3)((1-x)^{3/2} - 1)) / B(2, 1/2) = 0.00463584
        a = np.array([10.0, 12.0, 9.0, 11.0, 13.0])
        b = np.array([8.0, 11.0, 7.0, 10.0, 12.0])
        res = paired_t(a, b)
        assert res.statistic == pytest.approx(5.7154760664, abs=1e-9)
        assert res.p_value == pytest.approx(0.0046358381, abs=1e-7)

    def test_anova_matches_t_for_two_columns(self):
        # with k=2, repeated-measures F equals the squared paired t
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = rng.normal(size=(8, 2))
            f = rm_anova(m)
            t = paired_t(m[:, 0], m[:, 1])
            if not t.degenerate:
                assert f.statistic == pytest.approx(t.statistic**2, rel=1e-9)
                assert f.p_value == pytest.approx(t.p_value, rel=1e-9)

    def test_anova_textbook_value(self):
        # n=4 subjects, k=3: hand computation of the sums of squares
        m = np.array([[3.0, 4.0, 6.0], [2.0, 3.0, 5.0], [4.0, 4.0, 7.0], [3.0, 5.0, 6.0]])
        n, k = m.shape
        grand = m.mean()
        ss_treat = n * ((m.mean(axis=0) - grand) ** 2).sum()
        ss_sub = k * ((m.mean(axis=1) - grand) ** 2).sum()
        ss_err = ((m - grand) ** 2).sum() - ss_treat - ss_sub
        f_hand = (ss_treat / (k - 1)) / (ss_err / ((n - 1) * (k - 1)))
        assert rm_anova(m).statistic == pytest.approx(f_hand)


class TestBonferroni:
    def test_single(self):
        assert bonferroni([0.04]) == [True]

    def test_four_way_threshold(self):
        assert bonferroni([0.04, 0.5, 0.9, 0.2]) == [False, False, False, False]
        assert bonferroni([0.012, 0.5, 0.9, 0.2]) == [True, False, False, False]

    def test_two(self):
        assert bonferroni([0.01, 0.03]) == [True, False]

    def test_exact_threshold_not_significant(self):
        assert bonferroni([0.05]) == [False]  # strict inequality


class TestAlignment:
    def test_alignment_check(self):
        a = [outcome(0, Result.SUCCESS, 4.0), outcome(1, Result.COLLISION)]
        b = [outcome(0, Result.COLLISION), outcome(1, Result.SUCCESS, 5.0)]
        align_outcomes([a, b])
        c = [outcome(1, Result.COLLISION), outcome(0, Result.SUCCESS, 5.0)]
        with pytest.raises(ValueError):
            align_outcomes([a, c])

    def test_binary_matrix(self):
        a = [outcome(0, Result.SUCCESS, 4.0), outcome(1, Result.COLLISION)]
        b = [outcome(0, Result.COLLISION), outcome(1, Result.COLLISION)]
        m = binary_matrix([a, b], Result.COLLISION)
        assert m.tolist() == [[0, 1], [1, 1]]
