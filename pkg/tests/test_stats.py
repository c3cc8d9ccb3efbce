import math

import pytest

from facetgen.stats import betainc, paired_ttest, t_two_tailed_p

# scipy.stats.ttest_rel on the same vectors, frozen
A = [0.31, 0.27, 0.45, 0.22, 0.38, 0.29, 0.41, 0.33, 0.25, 0.36]
B = [0.28, 0.25, 0.39, 0.24, 0.31, 0.27, 0.35, 0.30, 0.26, 0.30]


def test_matches_reference():
    res = paired_ttest(A, B)
    assert res.statistic == pytest.approx(3.281212449718384, abs=1e-6)
    assert res.pvalue == pytest.approx(0.00951083762768421, abs=1e-6)
    assert res.df == 9 and res.significant


def test_bonferroni_factor():
    assert not paired_ttest(A, B, num_comparisons=2).significant
    assert paired_ttest(A, B, num_comparisons=1).pvalue == paired_ttest(A, B).pvalue


def test_degenerate():
    res = paired_ttest([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    assert res.degenerate and not res.significant


def test_constant_shift_is_significant():
    a = [1.0 + 1e-9 * (i % 3) for i in range(8)]
    res = paired_ttest(a, [0.0] * 8)
    assert res.statistic > 1e6 and res.significant


def test_input_checks():
    with pytest.raises(ValueError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_ttest([1.0, 2.0], [1.0])


@pytest.mark.parametrize("a,x", [(1.0, 0.3), (2.5, 0.7), (4.0, 0.05)])
def test_betainc_closed_form(a, x):
    # I_x(a, 1) = x^a and I_x(1, b) = 1 - (1 - x)^b
    assert betainc(a, 1.0, x) == pytest.approx(x ** a, rel=1e-12)
    assert betainc(1.0, a, x) == pytest.approx(1 - (1 - x) ** a, rel=1e-12)


def test_t_p_known_values():
    # df = 1 is Cauchy: p = 1 - 2 atan(t) / pi
    assert t_two_tailed_p(1.0, 1) == pytest.approx(0.5, abs=1e-12)
    assert t_two_tailed_p(3.0, 1) == pytest.approx(1 - 2 * math.atan(3.0) / math.pi, abs=1e-12)
    assert t_two_tailed_p(0.0, 5) == pytest.approx(1.0)
