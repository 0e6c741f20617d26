"""
Group comparisons over the metrics panel.

- one_way_anova: between-cohort test on per-ward period means
- mixed_anova: cohort (between) x year (within) repeated-measures design,
  no sphericity correction
- pairwise_time_comparisons: paired t-tests between years, Bonferroni corrected
- anova_report: everything above for a list of panel variables
"""

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy import special, stats

from ..core.config import config
from ..core.errors import UnbalancedPanelError
from ..core.models import AnovaResult, CohortGroup, PanelObservation, is_missing
from ..metrics.panel import WardMetricsPanel
from .groups import CohortTable

logger = structlog.get_logger(__name__)

# sums of squares below this fraction of sum(y^2) count as zero
RELATIVE_TOLERANCE = 1e-12


def f_pvalue(F: float, df1: int, df2: int) -> float:
    """
    Upper-tail probability of the F distribution.

    1 - CDF(F; df1, df2) = I_x(df2/2, df1/2) with x = df2 / (df2 + df1 F).

    Raises:
        ValueError: If F is negative or not finite, or a df is below 1
    """
    if not math.isfinite(F):
        raise ValueError(f"F must be finite, got {F}")
    if F < 0:
        raise ValueError(f"F must be nonnegative, got {F}")
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be at least 1")
    if F == 0:
        return 1.0
    x = df2 / (df2 + df1 * F)
    return float(min(1.0, max(0.0, special.betainc(df2 / 2.0, df1 / 2.0, x))))


def _f_test(effect: str, ss_effect: float, df1: int, ss_error: float, df2: int,
            tolerance: float) -> AnovaResult:
    if ss_error <= tolerance:
        if ss_effect <= tolerance:
            return AnovaResult(effect, 0.0, df1, df2, 1.0)
        return AnovaResult(effect, math.inf, df1, df2, 0.0, degenerate=True)
    F = (ss_effect / df1) / (ss_error / df2)
    return AnovaResult(effect, F, df1, df2, f_pvalue(F, df1, df2))


def one_way_anova(groups, effect: str = "group") -> AnovaResult:
    """
    Independent one-way ANOVA.

    Args:
        groups: Sequence (or mapping) of value sequences, one per group

    Returns:
        AnovaResult with df1 = g - 1 and df2 = n - g. Zero within-group
        variance gives F = 0 when the means agree, and F = inf, p = 0 flagged
        degenerate when they do not.

    Raises:
        ValueError: If fewer than two groups or a group with fewer than two values
    """
    samples = [np.asarray(list(g), dtype=float) for g in
               (groups.values() if isinstance(groups, Mapping) else groups)]
    if len(samples) < 2:
        raise ValueError("one-way ANOVA needs at least two groups")
    if any(len(s) < 2 for s in samples):
        raise ValueError("every group needs at least two observations")

    values = np.concatenate(samples)
    grand = values.mean()
    ss_between = float(sum(len(s) * (s.mean() - grand) ** 2 for s in samples))
    ss_within = float(sum(((s - s.mean()) ** 2).sum() for s in samples))
    tolerance = RELATIVE_TOLERANCE * float((values ** 2).sum())
    return _f_test(effect, ss_between, len(samples) - 1, ss_within,
                   len(values) - len(samples), tolerance)


@dataclass(frozen=True)
class MixedAnovaTable:
    """Sums of squares, degrees of freedom and F tests of a mixed design."""
    ss_total: float
    ss_group: float
    ss_subjects: float
    ss_time: float
    ss_interaction: float
    ss_error: float
    wards: int
    groups: int
    years: Tuple[int, ...]
    results: Tuple[AnovaResult, ...]

    @property
    def ss_sum(self) -> float:
        return self.ss_group + self.ss_subjects + self.ss_time + self.ss_interaction + self.ss_error


def _balanced_matrix(observations: Sequence[PanelObservation]):
    frame = pd.DataFrame(
        [(o.ward_code, o.group.value, o.year, o.value) for o in observations],
        columns=["ward", "group", "year", "value"],
    )
    if frame.empty:
        raise ValueError("mixed ANOVA needs observations")
    years = sorted(frame["year"].unique())
    counts = frame.groupby(["ward", "year"]).size()
    duplicated = counts[counts > 1].index.get_level_values("ward")
    per_ward = frame.groupby("ward")["year"].nunique()
    incomplete = per_ward[per_ward < len(years)].index
    groups_per_ward = frame.groupby("ward")["group"].nunique()
    mixed = groups_per_ward[groups_per_ward > 1].index
    offending = set(duplicated) | set(incomplete) | set(mixed)
    if offending:
        raise UnbalancedPanelError(offending)
    matrix = frame.pivot(index="ward", columns="year", values="value").sort_index()
    groups = frame.drop_duplicates("ward").set_index("ward")["group"].reindex(matrix.index)
    return matrix.to_numpy(dtype=float), groups.to_numpy(dtype=object), tuple(int(y) for y in years)


def mixed_anova_table(observations: Sequence[PanelObservation]) -> MixedAnovaTable:
    """
    Sums-of-squares table of the group x time mixed design.

    Raises:
        UnbalancedPanelError: If any ward lacks a year, repeats one, or
            appears in two groups
        ValueError: With fewer than two groups, two years, or no
            within-group replication
    """
    y, labels, years = _balanced_matrix(observations)
    n, t = y.shape
    names = sorted(set(labels))
    g = len(names)
    if g < 2 or t < 2 or n - g < 1:
        raise ValueError(f"mixed ANOVA needs 2+ groups, 2+ years and n > g (got g={g}, T={t}, n={n})")

    grand = y.mean()
    subject_means = y.mean(axis=1)
    time_means = y.mean(axis=0)
    ss_group = ss_subjects = ss_interaction = ss_error = 0.0
    for name in names:
        block = y[labels == name]
        n_g = block.shape[0]
        group_mean = block.mean()
        cell_means = block.mean(axis=0)
        ss_group += n_g * t * (group_mean - grand) ** 2
        ss_subjects += t * float(((subject_means[labels == name] - group_mean) ** 2).sum())
        ss_interaction += n_g * float(((cell_means - group_mean - time_means + grand) ** 2).sum())
        residual = block - subject_means[labels == name][:, None] - cell_means[None, :] + group_mean
        ss_error += float((residual ** 2).sum())
    ss_time = n * float(((time_means - grand) ** 2).sum())
    ss_total = float(((y - grand) ** 2).sum())

    tolerance = RELATIVE_TOLERANCE * float((y ** 2).sum())
    df_group, df_subjects = g - 1, n - g
    df_time, df_error = t - 1, (t - 1) * (n - g)
    results = (
        _f_test("group", ss_group, df_group, ss_subjects, df_subjects, tolerance),
        _f_test("time", ss_time, df_time, ss_error, df_error, tolerance),
        _f_test("group:time", ss_interaction, df_group * df_time, ss_error, df_error, tolerance),
    )
    return MixedAnovaTable(ss_total, float(ss_group), ss_subjects, ss_time, ss_interaction,
                           ss_error, n, g, years, results)


def mixed_anova(observations: Sequence[PanelObservation]) -> List[AnovaResult]:
    """Group, time and group:time F tests of a balanced panel."""
    return list(mixed_anova_table(observations).results)


@dataclass(frozen=True)
class PairwiseComparison:
    """Paired t-test between two years."""
    year_a: int
    year_b: int
    t: float
    df: int
    p_uncorrected: float
    p: float
    mean_difference: float
    degenerate: bool = False

    def to_dict(self) -> Dict:
        return {
            'years': [self.year_a, self.year_b],
            't': self.t if math.isfinite(self.t) else None,
            'df': self.df,
            'p_uncorrected': self.p_uncorrected,
            'p': self.p,
            'mean_difference': self.mean_difference,
            'degenerate': self.degenerate
        }


def pairwise_time_comparisons(observations: Sequence[PanelObservation]) -> List[PairwiseComparison]:
    """
    Paired t-test for every pair of years on within-ward differences.

    p values are Bonferroni corrected by the number of pairs and capped at
    1. Differences with zero variance give t = 0, p = 1 when their mean is
    zero and are flagged degenerate (p = 0) otherwise.
    """
    y, _, years = _balanced_matrix(observations)
    n = y.shape[0]
    if n < 2:
        raise ValueError("pairwise comparisons need at least two wards")
    pairs = list(itertools.combinations(range(len(years)), 2))
    comparisons = []
    for a, b in pairs:
        diff = y[:, b] - y[:, a]
        mean = float(diff.mean())
        sd = float(diff.std(ddof=1))
        scale = max(1.0, float(np.abs(diff).max()))
        if sd <= RELATIVE_TOLERANCE * scale:
            if abs(mean) <= RELATIVE_TOLERANCE * scale:
                t_stat, p_raw, degenerate = 0.0, 1.0, False
            else:
                t_stat, p_raw, degenerate = math.copysign(math.inf, mean), 0.0, True
        else:
            t_stat = mean / (sd / math.sqrt(n))
            p_raw = float(2.0 * stats.t.sf(abs(t_stat), n - 1))
            degenerate = False
        comparisons.append(PairwiseComparison(
            years[a], years[b], t_stat, n - 1, p_raw, min(1.0, p_raw * len(pairs)), mean, degenerate
        ))
    return comparisons


def panel_observations(panel: WardMetricsPanel, cohorts: CohortTable,
                       variable: str) -> Tuple[List[PanelObservation], List[str]]:
    """
    Observations of one variable for every cohort ward.

    Returns:
        (observations, excluded ward codes); wards missing the variable in
        any period are excluded so the panel stays balanced
    """
    table = panel.variable(variable)
    observations: List[PanelObservation] = []
    excluded: List[str] = []
    for cohort in cohorts.cohorts:
        if cohort.ward_code not in table.index:
            excluded.append(cohort.ward_code)
            continue
        series = table.loc[cohort.ward_code]
        if series.isna().any():
            excluded.append(cohort.ward_code)
            continue
        observations.extend(
            PanelObservation(cohort.ward_code, cohort.group, int(year), float(value))
            for year, value in series.items()
        )
    return observations, excluded


def _result_dict(result: AnovaResult, alpha: float) -> Dict:
    payload = result.to_dict()
    payload['significant'] = result.p < alpha
    return payload


def _group_means(observations: Sequence[PanelObservation]) -> Dict[str, Dict[str, Optional[float]]]:
    frame = pd.DataFrame([(o.group.value, o.year, o.value) for o in observations],
                         columns=["group", "year", "value"])
    years = sorted(frame["year"].unique()) if not frame.empty else []
    means = {}
    for group in CohortGroup:
        subset = frame[frame["group"] == group.value]
        by_year = subset.groupby("year")["value"].mean()
        means[group.value] = {str(y): (float(by_year[y]) if y in by_year.index else None) for y in years}
    return means


def anova_report(panel: WardMetricsPanel, cohorts: CohortTable,
                 variables: Optional[Sequence[str]] = None, alpha: float = 0.05) -> Dict:
    """
    JSON-ready ANOVA results for each variable.

    Per variable: the one-way test on per-ward period means, the three
    mixed-design tests, pairwise year comparisons and group means per year.
    Variables whose data cannot support a test carry a ``skipped`` reason.
    """
    variables = list(variables or config.ANOVA_VARIABLES)
    report: Dict = {'spec_version': config.SPEC_VERSION, 'alpha': alpha,
                    'group_sizes': cohorts.sizes(), 'variables': {}}
    for variable in variables:
        observations, excluded = panel_observations(panel, cohorts, variable)
        entry: Dict = {'wards': len({o.ward_code for o in observations}), 'excluded': len(excluded)}
        per_ward: Dict[str, List[float]] = {}
        for obs in observations:
            per_ward.setdefault(obs.ward_code, []).append(obs.value)
        by_group: Dict[str, List[float]] = {}
        for obs in observations:
            if obs.year == observations[0].year:
                by_group.setdefault(obs.group.value, []).append(float(np.mean(per_ward[obs.ward_code])))
        usable = {k: v for k, v in sorted(by_group.items()) if len(v) >= 2}
        try:
            entry['one_way'] = _result_dict(one_way_anova(usable), alpha)
            table = mixed_anova_table([o for o in observations if o.group.value in usable])
            entry['mixed'] = [_result_dict(r, alpha) for r in table.results]
            entry['pairwise'] = [c.to_dict() for c in pairwise_time_comparisons(observations)]
        except ValueError as e:
            entry['skipped'] = str(e)
            logger.warning("anova_skipped", variable=variable, reason=str(e))
        entry['group_means'] = _group_means(observations)
        report['variables'][variable] = entry
        logger.info("anova_variable_done", variable=variable, wards=entry['wards'],
                    skipped='skipped' in entry)
    return report
