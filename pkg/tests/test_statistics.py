"""Tests the ANCOVA, multiple-comparison correction and condition comparisons"""
import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm
import statsmodels.formula.api as smf
from scipy import stats
from statsmodels.stats.anova import anova_lm

from app.components.metrics import ScoreRecord
from app.components.statistics import (
    ancova,
    bonferroni,
    compare_conditions,
    compare_groups,
    f_survival,
    two_sample_ttest,
)
from app.components.utils.errors import DesignError


def simulated_design(seed=7, per_group=20, effects=(0.0, 0.4, -0.3)):
    rng = np.random.default_rng(seed)
    groups = np.repeat(['a', 'b', 'c'], per_group)
    x = rng.normal(5.0, 2.0, size=len(groups))
    shift = np.repeat(effects, per_group)
    y = 1.0 + 0.5 * x + shift + rng.normal(0.0, 1.0, size=len(groups))
    return y, x, groups


def test_ancova_matches_statsmodels_nested_ols():
    y, x, groups = simulated_design()
    dummies = np.column_stack([(groups == 'b').astype(float), (groups == 'c').astype(float)])
    reduced = sm.OLS(y, sm.add_constant(x)).fit()
    full = sm.OLS(y, np.column_stack([sm.add_constant(x), dummies])).fit()
    f_ref, p_ref, df_diff = full.compare_f_test(reduced)

    result = ancova(y, x, groups)
    assert result.df1 == df_diff == 2
    assert result.df2 == len(y) - 4
    assert result.f == pytest.approx(f_ref, rel=1e-6)
    assert result.p == pytest.approx(p_ref, rel=1e-6, abs=1e-12)
    assert result.coefficients['covariate'] == pytest.approx(full.params[1], rel=1e-6)
    assert result.coefficients['group[c]'] == pytest.approx(full.params[3], rel=1e-6)


def test_zero_slope_example():
    y = [1, 3, 1, 3, 4, 6, 4, 6]
    x = [1, 1, -1, -1, 1, 1, -1, -1]
    groups = ['A'] * 4 + ['B'] * 4
    result = ancova(y, x, groups)
    assert (result.df1, result.df2) == (1, 5)
    assert result.f == pytest.approx(11.25)
    assert result.p == pytest.approx(stats.f.sf(11.25, 1, 5), rel=1e-9)
    assert result.coefficients['covariate'] == pytest.approx(0.0, abs=1e-12)
    assert result.coefficients['group[B]'] == pytest.approx(3.0)

    one_way = ancova(y, None, groups)
    assert (one_way.df1, one_way.df2) == (1, 6)
    assert one_way.f == pytest.approx(13.5)


def test_identical_groups_show_no_effect():
    y = [1, 2, 3, 4] * 2
    x = [1, 2, 3, 5] * 2
    result = ancova(y, x, ['a'] * 4 + ['b'] * 4)
    assert result.f == pytest.approx(0.0, abs=1e-9)
    assert result.p > 0.99


def test_affine_covariate_transform_leaves_test_unchanged():
    y, x, groups = simulated_design(seed=3)
    base = ancova(y, x, groups)
    shifted = ancova(y, 3.0 * x + 7.0, groups)
    assert shifted.f == pytest.approx(base.f, rel=1e-9)
    assert shifted.p == pytest.approx(base.p, rel=1e-9)


def test_group_shift_is_detected():
    rng = np.random.default_rng(11)
    y = np.concatenate([rng.normal(0.0, 0.5, 50), rng.normal(1.0, 0.5, 50)])
    x = rng.integers(3, 9, size=100)
    assert ancova(y, x, ['a'] * 50 + ['b'] * 50).p < 1e-6


def test_exact_group_fit():
    result = ancova([1, 1, 2, 2], None, ['a', 'a', 'b', 'b'])
    assert result.f == float('inf')
    assert result.p == 0.0


@pytest.mark.parametrize('y,x,groups', [
    ([1, 2, 3], [1, 2, 3], ['a', 'a', 'a']),
    ([1, 2, 3], [1, 2, 3], ['a', 'a', 'b']),
    ([1, 2, 3, 4, 5, 6], [0, 0, 1, 1, 0, 1], ['a', 'a', 'b', 'b', 'a', 'b']),
])
def test_invalid_designs(y, x, groups):
    with pytest.raises(DesignError):
        ancova(y, x, groups)


def test_f_survival_edges():
    assert f_survival(0.0, 1, 5) == 1.0
    assert f_survival(float('inf'), 1, 5) == 0.0
    assert f_survival(11.25, 1, 5) == pytest.approx(stats.f.sf(11.25, 1, 5))


def test_ancova_matches_anova_table():
    y, x, groups = simulated_design(seed=5)
    data = pd.DataFrame({'y': y, 'x': x, 'g': groups})
    reduced = smf.ols('y ~ x', data).fit()
    full = smf.ols('y ~ x + C(g)', data).fit()
    table = anova_lm(reduced, full)

    result = ancova(y, x, groups)
    assert result.f == pytest.approx(table['F'].iloc[1], rel=1e-9)
    assert result.p == pytest.approx(table['Pr(>F)'].iloc[1], rel=1e-9)
    assert result.df2 == int(table['df_resid'].iloc[1])


def test_bonferroni():
    assert bonferroni([0.01, 0.04, 0.5]) == pytest.approx([0.03, 0.12, 1.0])
    assert bonferroni([]) == []


def test_compare_conditions_corrects_across_all_tests():
    records = [record('base', s, 3) for s in (2, 3, 2, 3)] + [record('variant', s, 3) for s in (4, 5, 4, 6)]
    records += [record('base', s, 3, rule_kind='conjunction') for s in (5, 6, 7, 6)]
    records += [record('variant', s, 3, rule_kind='conjunction') for s in (6, 6, 8, 7)]
    entries = compare_conditions(records, [('base', 'variant')])
    assert len(entries) == 2
    for entry in entries:
        assert entry['p_corrected'] == pytest.approx(min(1.0, 2 * entry['p']))


def test_welch_ttest_matches_scipy():
    a, b = [2, 3, 3, 4, 5], [4, 6, 5, 7, 8, 9]
    result = two_sample_ttest(a, b)
    reference = stats.ttest_ind(a, b, equal_var=False)
    assert result.statistic == pytest.approx(reference.statistic)
    assert result.p == pytest.approx(reference.pvalue)
    with pytest.raises(DesignError):
        two_sample_ttest([1], [1, 2])


def record(condition, steps, n_colors, rule_kind='single_feature', failure=None):
    return ScoreRecord(condition=condition, episode=0, seed=0, policy=condition, rule_kind=rule_kind,
                       n_colors=n_colors, steps_to_sufficiency=steps, censored=False, accuracy=1, failure=failure)


def test_compare_groups_uses_color_count_covariate():
    records = []
    for n_colors in (3, 4, 5):
        records += [record('base', n_colors + d, n_colors) for d in (0, 1, 0, 1)]
        records += [record('variant', n_colors + 2 + d, n_colors) for d in (0, 1, 1, 0)]
    result = compare_groups(records, 'base', 'variant', 'single_feature')
    assert (result.df1, result.df2) == (1, len(records) - 3)
    assert result.coefficients['covariate'] == pytest.approx(1.0)
    assert result.p < 1e-6


def test_compare_groups_without_covariate_spread():
    records = [record('base', s, 3) for s in (2, 3, 2, 3)] + [record('variant', s, 3) for s in (4, 5, 4, 5)]
    result = compare_groups(records, 'base', 'variant', 'single_feature')
    assert (result.df1, result.df2) == (1, 6)
    assert 'covariate' not in result.coefficients


def test_compare_conditions_corrects_and_reports_errors():
    records = [record('base', s, 3) for s in (2, 3, 2, 3)] + [record('variant', s, 3) for s in (4, 5, 4, 6)]
    records += [record('base', s, 3, rule_kind='conjunction') for s in (5, 6, 7)]
    entries = compare_conditions(records, [('base', 'variant')])
    by_kind = {entry['rule_kind']: entry for entry in entries}
    assert 'error' in by_kind['conjunction']
    single = by_kind['single_feature']
    # one test survived, so the correction factor is 1
    assert single['p_corrected'] == pytest.approx(single['p'])
    assert single['significant'] == (single['p'] < 0.05)
