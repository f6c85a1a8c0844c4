'''Significance tests for comparing exploration conditions.

ANCOVA is a nested OLS comparison fitted with the statsmodels formula API: the
full model `y ~ covariate + C(group)` against the covariate-only model, tested
with an F-test on the group terms.
'''

# LOAD DEPENDENCY ----------------------------------------------------------
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.formula.api as smf
from scipy import stats
from statsmodels.stats.multitest import multipletests

from app.components.metrics import ScoreRecord
from app.components.utils.errors import DesignError

logger = logging.getLogger(__name__)

# relative residual size treated as an exact fit
_EXACT_FIT = 1e-12


# CLASS OBJECT -------------------------------------------------------------
@dataclass
class AncovaResult:
    f: float
    df1: int
    df2: int
    p: float
    coefficients: Dict[str, float] = field(default_factory=dict)
    n: int = 0

    def to_dict(self) -> Dict:
        return {'F': self.f, 'df1': self.df1, 'df2': self.df2, 'p': self.p,
                'n': self.n, 'coefficients': dict(self.coefficients)}


@dataclass
class TTestResult:
    statistic: float
    p: float
    n_a: int
    n_b: int


# FUNCTIONS ----------------------------------------------------------------
def f_survival(f: float, df1: int, df2: int) -> float:
    '''P(F' >= f) for F' ~ F(df1, df2).'''
    if f <= 0:
        return 1.0
    if np.isinf(f):
        return 0.0
    return float(stats.f.sf(f, df1, df2))


def ancova(y: Sequence[float], covariate: Optional[Sequence[float]], group_labels: Sequence) -> AncovaResult:
    '''Test for a group effect on `y` adjusted for one covariate.

    Args:
        y: outcome per unit.
        covariate: covariate per unit, or None for a one-way ANOVA.
        group_labels: group per unit; the first label in sorted order is the
            reference level of the coefficients.

    Returns:
        AncovaResult with df1 = groups - 1 and df2 = N - groups - 1
        (N - groups without a covariate).

    Raises:
        DesignError: fewer than two groups, too few units, or a design whose
            columns are linearly dependent (e.g. a covariate confounded with
            the groups).
    '''
    if len(group_labels) != len(y) or (covariate is not None and len(covariate) != len(y)):
        raise ValueError('y, covariate and group_labels must have the same length')
    data = pd.DataFrame({'y': np.asarray(y, dtype=float), 'group': [str(g) for g in group_labels]})
    levels = sorted(data['group'].unique())
    k = len(levels)
    if k < 2:
        raise DesignError(f'need at least two groups, got {k}')
    n_covariates = 0 if covariate is None else 1
    n = len(data)
    if n <= k + n_covariates:
        raise DesignError(f'{n} units cannot fit {k} groups and {n_covariates} covariate(s)')

    if covariate is not None:
        data['covariate'] = np.asarray(covariate, dtype=float)
        full_model = smf.ols('y ~ covariate + C(group)', data)
        reduced_model = smf.ols('y ~ covariate', data)
    else:
        full_model = smf.ols('y ~ C(group)', data)
        reduced_model = smf.ols('y ~ 1', data)
    exog = full_model.exog
    if np.linalg.matrix_rank(exog) < exog.shape[1]:
        raise DesignError('design matrix is rank deficient')

    full = full_model.fit()
    reduced = reduced_model.fit()
    df1, df2 = k - 1, int(round(full.df_resid))
    scale = max(float(data['y'] @ data['y']), 1.0)
    if full.ssr <= _EXACT_FIT * scale:
        # groups explain every remaining deviation, or there is nothing to explain
        explained = reduced.ssr - full.ssr
        f = 0.0 if explained <= _EXACT_FIT * scale else float('inf')
        p = f_survival(f, df1, df2)
    else:
        f, p, _ = full.compare_f_test(reduced)
        f, p = max(float(f), 0.0), float(p)

    coefficients = {'intercept': float(full.params['Intercept'])}
    if covariate is not None:
        coefficients['covariate'] = float(full.params['covariate'])
    for level in levels[1:]:
        coefficients[f'group[{level}]'] = float(full.params[f'C(group)[T.{level}]'])
    return AncovaResult(f=float(f), df1=df1, df2=df2, p=p, coefficients=coefficients, n=n)


def bonferroni(p_values: Sequence[float]) -> List[float]:
    if len(p_values) == 0:
        return []
    _, corrected, _, _ = multipletests(list(p_values), method='bonferroni')
    return [float(p) for p in corrected]


def two_sample_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    '''Welch two-sample t-test.'''
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DesignError('each sample needs at least two values')
    result = stats.ttest_ind(a, b, equal_var=False)
    return TTestResult(statistic=float(result.statistic), p=float(result.pvalue), n_a=len(a), n_b=len(b))


def compare_groups(records: Iterable[ScoreRecord], base: str, variant: str, rule_kind: str) -> AncovaResult:
    '''ANCOVA of steps-to-sufficiency between two conditions of one rule kind.

    Units are episodes; the covariate is the number of colors. When every
    episode has the same color count the covariate is dropped and the test is
    a one-way ANOVA.
    '''
    rows = [
        r for r in records
        if r.condition in (base, variant) and r.rule_kind == rule_kind and not r.aborted
    ]
    if not rows:
        raise DesignError(f'no usable {rule_kind} episodes for {base} vs {variant}')
    y = [r.steps_to_sufficiency for r in rows]
    colors = [r.n_colors for r in rows]
    labels = [('0' if r.condition == base else '1') + f':{r.condition}' for r in rows]
    covariate = colors if len(set(colors)) > 1 else None
    return ancova(y, covariate, labels)


def compare_conditions(records: Sequence[ScoreRecord], pairs: Sequence[Tuple[str, str]],
                       alpha: float = 0.05) -> List[Dict]:
    '''Every base-vs-variant ANCOVA per rule kind, Bonferroni-corrected across all tests.'''
    records = list(records)
    results = []
    for base, variant in pairs:
        kinds = sorted({r.rule_kind for r in records if r.condition in (base, variant)})
        for rule_kind in kinds:
            entry = {'base': base, 'variant': variant, 'rule_kind': rule_kind}
            try:
                entry.update(compare_groups(records, base, variant, rule_kind).to_dict())
            except DesignError as error:
                logger.warning(f'{base} vs {variant} ({rule_kind}): {error}')
                entry['error'] = str(error)
            results.append(entry)

    tested = [entry for entry in results if 'p' in entry]
    for entry, corrected in zip(tested, bonferroni([entry['p'] for entry in tested])):
        entry['p_corrected'] = corrected
        entry['significant'] = corrected < alpha
    return results
