"""
Ward cohorts by initial deprivation and cultural expenditure advantage.

            CEA > 1     CEA <= 1
  more      G3          G2
  less      G1          G4
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import structlog

from ..core.config import config
from ..core.models import Cohort, CohortGroup, Rejections, is_missing
from ..ingest.readers import DeprivationTable
from ..metrics.panel import WardMetricsPanel

logger = structlog.get_logger(__name__)


def assign_group(imd_rank_2010_percentile: Optional[float], cea_mean: Optional[float],
                 cutoff: float = 0.5) -> Optional[CohortGroup]:
    """
    Group of one ward.

    A ward is more deprived when its 2010 rank percentile (rank / N, rank 1
    most deprived) is at or below the cutoff, and more advantaged when its
    mean CEA exceeds 1.

    Returns:
        The CohortGroup, or None when either input is missing
    """
    if is_missing(imd_rank_2010_percentile) or is_missing(cea_mean):
        return None
    more_deprived = imd_rank_2010_percentile <= cutoff
    advantaged = cea_mean > 1.0
    if more_deprived:
        return CohortGroup.G3 if advantaged else CohortGroup.G2
    return CohortGroup.G1 if advantaged else CohortGroup.G4


def deprivation_cutoff(imd_2010: pd.DataFrame, basis: str = "median_rank") -> float:
    """
    Percentile separating more from less deprived wards.

    median_rank: the median 2010 rank over N. mean_score: the share of wards
    scoring above the mean score (higher score = more deprived).
    """
    n = len(imd_2010)
    if n == 0:
        return 0.0
    if basis == "median_rank":
        return float(np.median(imd_2010["rank"])) / n
    if basis == "mean_score":
        scores = imd_2010["score"].to_numpy(dtype=float)
        return float((scores > scores.mean()).sum()) / n
    raise ValueError(f"deprivation basis must be one of {config.DEPRIVATION_BASES}, got {basis!r}")


@dataclass
class CohortTable:
    """Cohort assignment of every retained ward plus exclusion counts."""
    cohorts: List[Cohort]
    cutoff: float
    basis: str
    details: pd.DataFrame
    exclusions: Rejections = field(default_factory=Rejections)

    def __len__(self) -> int:
        return len(self.cohorts)

    def group_of(self) -> Dict[str, CohortGroup]:
        return {c.ward_code: c.group for c in self.cohorts}

    def sizes(self) -> Dict[str, int]:
        counts = {g.value: 0 for g in CohortGroup}
        for cohort in self.cohorts:
            counts[cohort.group.value] += 1
        return counts

    def wards(self, group: CohortGroup) -> List[str]:
        return [c.ward_code for c in self.cohorts if c.group is group]

    def to_frame(self) -> pd.DataFrame:
        return self.details.reset_index()


def assign_cohorts(panel: WardMetricsPanel, imd: DeprivationTable,
                   basis: str = "median_rank") -> CohortTable:
    """
    Assign every panel ward to a cohort.

    CEA_mean averages the ward's CEA over the panel periods, ignoring
    missing periods. Wards without a 2010 IMD row or without any CEA value
    are excluded and counted.
    """
    imd_2010 = imd.edition(2010)
    cutoff = deprivation_cutoff(imd_2010, basis)
    n = len(imd_2010)
    cea_mean = panel.period_mean("CEA")

    exclusions = Rejections()
    cohorts: List[Cohort] = []
    records = []
    for ward_code in sorted(panel.wards):
        if ward_code not in imd_2010.index:
            exclusions.add("missing imd 2010")
            continue
        cea = cea_mean.get(ward_code, np.nan)
        if is_missing(cea):
            exclusions.add("missing CEA")
            continue
        rank = int(imd_2010.at[ward_code, "rank"])
        percentile = rank / n
        group = assign_group(percentile, float(cea), cutoff)
        cohorts.append(Cohort(ward_code, group))
        records.append({
            'ward_code': ward_code,
            'group': group.value,
            'imd_rank_2010': rank,
            'imd_score_2010': float(imd_2010.at[ward_code, "score"]),
            'percentile': percentile,
            'CEA_mean': float(cea),
        })

    details = pd.DataFrame(records, columns=["ward_code", "group", "imd_rank_2010", "imd_score_2010",
                                             "percentile", "CEA_mean"]).set_index("ward_code")
    table = CohortTable(cohorts, cutoff, basis, details, exclusions)
    logger.info("cohorts_assigned", basis=basis, cutoff=cutoff, retained=len(table),
                excluded=exclusions.total, sizes=table.sizes())
    return table
