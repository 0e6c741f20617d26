"""
The ward x period metrics panel.

Assembles every level metric and growth rate per (ward, calendar year)
and exports the panel as CSV.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from ..core.errors import DataError
from ..core.models import (
    GROWTH_FIELDS,
    LEVEL_FIELDS,
    ExpenditureCategory,
    GrowthRow,
    PeriodMap,
    Ward,
    WardMetricsRow,
)
from ..graph.snapshot import SnapshotGraph, clustering_vector
from ..ingest.expenditure import WardExpenditure
from ..ingest.spatial import VenueWardIndex
from .quotients import cultural_expenditure_advantage, cultural_venue_advantage
from .ward_metrics import (
    acc_by_ward,
    area_series,
    cross_ward_flows,
    growth_series,
    ior_series,
    node_counts_by_ward,
    venue_creation_by_ward,
    venue_stock_by_ward,
)

logger = structlog.get_logger(__name__)

INTEGER_FIELDS = ("N", "VC")

PER_CAPITA_FEATURES = {
    "CEOP": ExpenditureCategory.OPEN_SPACES,
    "CECH": ExpenditureCategory.CULTURE_HERITAGE,
    "CELS": ExpenditureCategory.LIBRARY_SERVICE,
    "CERS": ExpenditureCategory.RECREATION_SPORT,
    "CET": ExpenditureCategory.TOURISM,
}

# what each growth rate is computed from
GROWTH_SOURCES = {"GRN": "N", "GRI": "IC", "GRO": "OC", "GRIOR": "IOR", "GRACC": "ACC", "GRVC": "VC"}


@dataclass(frozen=True)
class WardMetricsPanel:
    """
    Level metrics and growth rates per (ward_code, period).

    ``frame`` has a (ward_code, period) MultiIndex covering every ward in
    every period, with LEVEL_FIELDS then GROWTH_FIELDS as columns.
    """
    frame: pd.DataFrame
    periods: Tuple[int, ...]

    @property
    def wards(self) -> List[str]:
        return list(self.frame.index.get_level_values("ward_code").unique())

    @property
    def first_period(self) -> int:
        return self.periods[0]

    @property
    def last_period(self) -> int:
        return self.periods[-1]

    def variable(self, name: str) -> pd.DataFrame:
        """One variable as a ward x period table."""
        if name not in self.frame.columns:
            raise KeyError(f"unknown panel variable: {name}")
        return self.frame[name].unstack("period").reindex(columns=list(self.periods))

    def period_mean(self, name: str, skipna: bool = True) -> pd.Series:
        """Per-ward mean of a variable over all periods."""
        return self.variable(name).mean(axis=1, skipna=skipna)

    def row(self, ward_code: str, period: int) -> WardMetricsRow:
        return WardMetricsRow.from_mapping(ward_code, period, self.frame.loc[(ward_code, period)])

    def growth_row(self, ward_code: str, period: int) -> GrowthRow:
        return GrowthRow.from_mapping(ward_code, period, self.frame.loc[(ward_code, period)])

    def growth_rows(self) -> Iterator[GrowthRow]:
        for (ward_code, period), values in self.frame.iterrows():
            if period != self.first_period:
                yield GrowthRow.from_mapping(ward_code, period, values)


def ward_expenditure_features(expenditure: WardExpenditure, period_map: PeriodMap) -> pd.DataFrame:
    """
    CE, TE, CEA and the five per-capita spending features per (ward, period).

    CE sums the five cultural categories; TE is total service spending. CEA
    is evaluated separately for each period across all wards. Fiscal years
    outside the period map are ignored.
    """
    frame = expenditure.frame
    cultural = [c.value for c in ExpenditureCategory.cultural()]
    fiscal = frame.index.get_level_values("fiscal_year")
    keep = fiscal.isin(period_map.fiscal_years)
    frame = frame[keep]

    features = pd.DataFrame(index=frame.index)
    features["CE"] = frame[cultural].sum(axis=1, skipna=False)
    features["TE"] = frame[ExpenditureCategory.TOTAL_SERVICES.value]
    for name, category in PER_CAPITA_FEATURES.items():
        features[name] = expenditure.per_capita(category)[keep]
    features["period"] = [period_map.calendar_year(f) for f in features.index.get_level_values("fiscal_year")]
    features = features.reset_index().drop(columns="fiscal_year").set_index(["ward_code", "period"])
    features["CEA"] = np.nan
    for _, group in features.groupby(level="period"):
        features.loc[group.index, "CEA"] = cultural_expenditure_advantage(group["CE"], group["TE"])
    return features.sort_index()


def build_metrics_panel(graphs: Mapping[int, SnapshotGraph], index: VenueWardIndex,
                        venues: pd.DataFrame, expenditure: WardExpenditure,
                        wards: Sequence[Ward], period_map: PeriodMap) -> WardMetricsPanel:
    """
    Build the full panel from yearly graphs, venues and ward expenditure.

    Args:
        graphs: Calendar year -> snapshot; years must be consecutive
        index: Venue-to-ward assignment
        venues: Venue frame (indexed by id, with created_at and is_cultural)
        expenditure: Apportioned ward expenditure
        wards: All wards
        period_map: Fiscal to calendar year alignment

    Returns:
        WardMetricsPanel with one row per (ward, year); growth rates are
        missing in the first year

    Raises:
        DataError: If no graphs are given or the years are not consecutive
    """
    periods = tuple(sorted(graphs))
    if not periods:
        raise DataError("metrics panel needs at least one snapshot")
    if list(periods) != list(range(periods[0], periods[-1] + 1)):
        raise DataError(f"snapshot years are not consecutive: {list(periods)}")

    codes = sorted(w.ward_code for w in wards)
    areas = area_series(wards).reindex(codes)
    spending = ward_expenditure_features(expenditure, period_map)

    levels = []
    for year in periods:
        graph = graphs[year]
        flows = cross_ward_flows(graph, index).reindex(codes, fill_value=0.0)
        stock = venue_stock_by_ward(venues, index, year).reindex(codes, fill_value=0)
        vc = venue_creation_by_ward(venues, index, year).reindex(codes, fill_value=0)
        table = pd.DataFrame(index=pd.Index(codes, name="ward_code"))
        table["N"] = node_counts_by_ward(graph, index).reindex(codes, fill_value=0).astype(np.int64)
        table["IC"] = flows["IC"]
        table["OC"] = flows["OC"]
        table["IOR"] = ior_series(flows["IC"], flows["OC"])
        table["ACC"] = acc_by_ward(graph, index, clustering_vector(graph)).reindex(codes, fill_value=0.0)
        table["VC"] = vc.astype(np.int64)
        table["VCD"] = vc / areas
        table["CVA"] = cultural_venue_advantage(stock["CV"], stock["TV"])
        table["period"] = year
        levels.append(table.reset_index().set_index(["ward_code", "period"]))

    frame = pd.concat(levels).sort_index()
    frame = frame.join(spending[["CE", "CEA", *PER_CAPITA_FEATURES]], how="left")
    frame = frame[list(LEVEL_FIELDS)]

    for name in GROWTH_FIELDS:
        frame[name] = np.nan
    for prev, curr in zip(periods, periods[1:]):
        before = frame.xs(prev, level="period")
        after = frame.xs(curr, level="period")
        for name, source in GROWTH_SOURCES.items():
            values = growth_series(before[source], after[source])
            frame.loc[(slice(None), curr), name] = values.reindex(codes).to_numpy()

    logger.info("metrics_panel_built", wards=len(codes), periods=list(periods))
    return WardMetricsPanel(frame, periods)


def panel_to_frame(panel: WardMetricsPanel) -> pd.DataFrame:
    """Flat export frame: ward_code, t, then one column per variable."""
    flat = panel.frame.reset_index().rename(columns={"period": "t"})
    for name in INTEGER_FIELDS:
        flat[name] = flat[name].astype(np.int64)
    return flat


def write_panel_csv(panel: WardMetricsPanel, path) -> Path:
    """Write the panel CSV; missing values are empty fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    panel_to_frame(panel).to_csv(path, index=False, na_rep="", lineterminator="\n")
    return path
