"""
Borough expenditure apportioned to wards, and fiscal/calendar alignment.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from ..core.config import config
from ..core.errors import DataError
from ..core.models import ExpenditureCategory, PeriodMap, Ward, fiscal_start_year

logger = structlog.get_logger(__name__)

DEFAULT_FISCAL_YEARS = ("2010/11", "2011/12", "2012/13")
PER_CAPITA_SUFFIX = "_per_capita"


@dataclass(frozen=True)
class WardExpenditure:
    """
    Ward-level expenditure.

    ``frame`` is indexed by (ward_code, fiscal_year). For every category
    there is an amount column named after the category value and a
    ``<category>_per_capita`` column (NaN where population is unknown).
    Categories a borough did not report are NaN.
    """
    frame: pd.DataFrame

    @property
    def fiscal_years(self) -> List[str]:
        return sorted(self.frame.index.get_level_values("fiscal_year").unique(), key=fiscal_start_year)

    def amount(self, category: ExpenditureCategory) -> pd.Series:
        return self.frame[category.value]

    def per_capita(self, category: ExpenditureCategory) -> pd.Series:
        return self.frame[category.value + PER_CAPITA_SUFFIX]


def _borough_population(wards: Sequence[Ward]) -> pd.Series:
    populations = pd.DataFrame(
        [(w.borough_code, np.nan if w.population is None else float(w.population)) for w in wards],
        columns=["borough_code", "population"],
    )
    grouped = populations.groupby("borough_code")["population"]
    # any unknown ward population makes the borough total unknown
    return grouped.sum().where(grouped.count() == grouped.size())


def apportion_expenditure(records: pd.DataFrame, wards: Sequence[Ward]) -> WardExpenditure:
    """
    Divide each borough amount equally among the borough's wards.

    Per-capita values divide the ward amount by the borough population
    spread evenly over its wards.

    Args:
        records: Frame with borough_code, fiscal_year, category, amount
        wards: All wards

    Returns:
        WardExpenditure covering every ward and every reported fiscal year

    Raises:
        DataError: If a borough in the records has no wards, or a ward's
            borough has no records
    """
    ward_frame = pd.DataFrame(
        [(w.ward_code, w.borough_code) for w in wards], columns=["ward_code", "borough_code"]
    )
    ward_counts = ward_frame.groupby("borough_code").size()
    reported = set(records["borough_code"].unique())

    no_wards = sorted(reported - set(ward_counts.index))
    if no_wards:
        raise DataError(f"expenditure boroughs with zero wards: {', '.join(no_wards)}")
    no_records = sorted(set(ward_counts.index) - reported)
    if no_records:
        raise DataError(f"boroughs without expenditure records: {', '.join(no_records)}")

    borough = records.pivot_table(index=["borough_code", "fiscal_year"], columns="category",
                                  values="amount", aggfunc="first")
    categories = [c.value for c in ExpenditureCategory]
    borough = borough.reindex(columns=categories)
    population = _borough_population(wards)

    counts = borough.index.get_level_values("borough_code").map(ward_counts).to_numpy(dtype=float)
    per_ward = borough.div(counts, axis=0)
    per_capita = borough.div(
        borough.index.get_level_values("borough_code").map(population).to_numpy(dtype=float), axis=0
    )
    per_capita.columns = [c + PER_CAPITA_SUFFIX for c in per_capita.columns]
    borough_table = pd.concat([per_ward, per_capita], axis=1).reset_index()

    frame = (
        ward_frame.merge(borough_table, on="borough_code", how="left")
        .drop(columns="borough_code")
        .set_index(["ward_code", "fiscal_year"])
        .sort_index()
    )
    frame.columns.name = None
    logger.info("expenditure_apportioned", wards=len(ward_frame), boroughs=len(ward_counts),
                fiscal_years=len(borough.index.get_level_values("fiscal_year").unique()))
    return WardExpenditure(frame)


def align_periods(fiscal_years: Optional[Iterable[str]] = None,
                  offset: Optional[int] = None) -> PeriodMap:
    """
    Map fiscal years to the calendar years whose graphs they influence.

    Spending in fiscal year "2010/11" shows up in calendar year 2011 under
    the default offset of 1.

    Args:
        fiscal_years: Fiscal-year labels (defaults to 2010/11 - 2012/13)
        offset: Calendar year = fiscal start year + offset

    Raises:
        DataError: If labels are malformed or not contiguous
    """
    offset = config.FISCAL_OFFSET if offset is None else offset
    labels = list(fiscal_years) if fiscal_years is not None else list(DEFAULT_FISCAL_YEARS)
    try:
        labels.sort(key=fiscal_start_year)
        return PeriodMap(tuple((label, fiscal_start_year(label) + offset) for label in labels))
    except ValueError as e:
        raise DataError(f"cannot align fiscal years {labels}: {e}") from e
