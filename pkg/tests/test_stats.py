import math

import numpy as np
import pytest

from qmoe.errors import InputError, NumericalError
from qmoe.rng import Rng
from qmoe.stats import betainc, paired_ttest_bonferroni, student_t_sf2


class TestStudentTDistribution:
    def test_closed_form_nu1(self):
        # CDF for one degree of freedom: 1/2 + arctan(t)/pi
        for t in (0.1, 0.5, 1.0, 2.5, 7.0, 30.0):
            exact = 2.0 * (1.0 - (0.5 + math.atan(t) / math.pi))
            assert student_t_sf2(t, 1) == pytest.approx(exact, abs=1e-10)

    def test_closed_form_nu2(self):
        # CDF for two degrees of freedom: 1/2 + t / (2 sqrt(2 + t^2))
        for t in (0.1, 0.5, 1.0, 2.5, 7.0, 30.0):
            exact = 2.0 * (1.0 - (0.5 + t / (2.0 * math.sqrt(2.0 + t * t))))
            assert student_t_sf2(t, 2) == pytest.approx(exact, abs=1e-10)

    def test_against_scipy_across_dofs(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        for dof in (1, 2, 3, 5, 10, 49, 200):
            for t in (0.0, 0.3, 1.0, 2.0, 4.5, 12.0):
                expected = 2.0 * scipy_stats.t.sf(t, dof)
                assert student_t_sf2(t, dof) == pytest.approx(expected, abs=1e-10)

    def test_symmetry_in_sign(self):
        assert student_t_sf2(-2.5, 7) == student_t_sf2(2.5, 7)

    def test_betainc_bounds(self):
        assert betainc(2.0, 3.0, 0.0) == 0.0
        assert betainc(2.0, 3.0, 1.0) == 1.0
        with pytest.raises(InputError):
            betainc(-1.0, 1.0, 0.5)
        with pytest.raises(InputError):
            betainc(1.0, 1.0, 1.5)

    def test_betainc_against_scipy(self):
        scipy_special = pytest.importorskip("scipy.special")
        scipy_betainc = scipy_special.betainc
        for a in (0.5, 1.0, 2.5, 24.5):
            for b in (0.5, 1.0, 3.0):
                for x in (0.01, 0.25, 0.5, 0.75, 0.99):
                    assert betainc(a, b, x) == pytest.approx(
                        float(scipy_betainc(a, b, x)), abs=1e-10)


class TestPairedTTest:
    def test_identical_lists_not_significant(self):
        result = paired_ttest_bonferroni([0.4, 0.6, 0.5], [0.4, 0.6, 0.5])
        assert result.raw_p == 1.0
        assert result.corrected_p == 1.0
        assert not result.significant
        assert result.t_statistic == 0.0

    def test_constructed_extreme_t(self):
        # differences all +0.1 except one +0.1001 over n=50: tiny variance,
        # enormous t, decisively significant
        a = [0.1] * 49 + [0.1001]
        b = [0.0] * 50
        result = paired_ttest_bonferroni(a, b, num_comparisons=1)
        assert result.t_statistic > 1e4
        assert result.raw_p < 1e-100
        assert result.significant

    def test_against_scipy_on_random_data(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        for seed in range(20):
            rng = Rng(seed)
            n = 5 + rng.integer(60)
            a = rng.normal((n,))
            b = a + 0.3 * rng.normal((n,)) + 0.05
            ours = paired_ttest_bonferroni(a, b, num_comparisons=1)
            ref = scipy_stats.ttest_rel(np.asarray(a), np.asarray(b))
            assert ours.t_statistic == pytest.approx(ref.statistic, rel=1e-10)
            assert ours.raw_p == pytest.approx(ref.pvalue, rel=1e-8)

    def test_bonferroni_multiplication_rule(self):
        # raw p about 0.0005 with 3 comparisons -> corrected 0.0015, not
        # significant at 0.001
        rng = Rng(4)
        for _ in range(200):
            a = rng.normal((40,))
            b = a + 0.12 * rng.normal((40,)) + 0.07
            res1 = paired_ttest_bonferroni(a, b, num_comparisons=1)
            if 4e-4 < res1.raw_p < 6e-4:
                res3 = paired_ttest_bonferroni(a, b, num_comparisons=3)
                assert res3.corrected_p == pytest.approx(3 * res3.raw_p)
                assert not res3.significant
                break
        else:
            pytest.fail("no sample landed in the target p range")
        direct = paired_ttest_bonferroni([0.0, 1.0, 2.0], [1.0, 1.0, 1.0],
                                         num_comparisons=3)
        assert direct.corrected_p == min(1.0, 3 * direct.raw_p)

    def test_corrected_p_capped_at_one(self):
        result = paired_ttest_bonferroni([0.5, 0.6, 0.4], [0.5, 0.59, 0.42],
                                         num_comparisons=1000)
        assert result.corrected_p == 1.0

    def test_degenerate_nonzero_variance_raises(self):
        with pytest.raises(NumericalError):
            paired_ttest_bonferroni([1.1, 2.1, 3.1], [1.0, 2.0, 3.0])

    def test_input_validation(self):
        with pytest.raises(InputError):
            paired_ttest_bonferroni([1.0], [1.0])
        with pytest.raises(InputError):
            paired_ttest_bonferroni([1.0, 2.0], [1.0])
        with pytest.raises(InputError):
            paired_ttest_bonferroni([1.0, 2.0], [1.0, 2.0], num_comparisons=0)
