"""Cohort assignment and ANOVA."""

from .anova import (
    anova_report,
    f_pvalue,
    mixed_anova,
    mixed_anova_table,
    one_way_anova,
    pairwise_time_comparisons,
    panel_observations,
)
from .groups import CohortTable, assign_cohorts, assign_group, deprivation_cutoff

__all__ = [
    "CohortTable",
    "anova_report",
    "assign_cohorts",
    "assign_group",
    "deprivation_cutoff",
    "f_pvalue",
    "mixed_anova",
    "mixed_anova_table",
    "one_way_anova",
    "pairwise_time_comparisons",
    "panel_observations",
]
