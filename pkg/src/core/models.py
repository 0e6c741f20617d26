"""
Core data models for the culture-graph pipeline.

This module defines the record types shared across stages:
- Ward: official area data
- PeriodMap: fiscal-year to calendar-year alignment
- Rejections: per-reason counts of dropped input rows
- WardMetricsRow, GrowthRow, GraphSummary: derived metrics
- Cohort, AnovaResult, PanelObservation: group comparison inputs/outputs
- LabeledSample, EvaluationRow, EvaluationReport: prediction inputs/outputs
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import pandas as pd

UNASSIGNED = "unassigned"


class ExpenditureCategory(Enum):
    """Local authority spending lines used in the analysis."""
    CULTURE_HERITAGE = "culture_heritage"
    RECREATION_SPORT = "recreation_sport"
    OPEN_SPACES = "open_spaces"
    TOURISM = "tourism"
    LIBRARY_SERVICE = "library_service"
    TOTAL_SERVICES = "total_services"

    @classmethod
    def cultural(cls) -> Tuple["ExpenditureCategory", ...]:
        """The five cultural sub-areas (everything except the total)."""
        return tuple(c for c in cls if c is not cls.TOTAL_SERVICES)


class CohortGroup(Enum):
    """Ward groups by initial deprivation and cultural expenditure advantage."""
    G1 = "G1"  # less deprived, more advantaged
    G2 = "G2"  # more deprived, less advantaged
    G3 = "G3"  # more deprived, more advantaged
    G4 = "G4"  # less deprived, less advantaged


class ChangeLabel(Enum):
    """Direction of deprivation change between IMD editions."""
    IMPROVED = "improved"
    WORSENED = "worsened"


def is_missing(value) -> bool:
    """True for None and NaN."""
    return value is None or (isinstance(value, float) and math.isnan(value))


def _opt(value) -> Optional[float]:
    return None if is_missing(value) else float(value)


Ring = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class Ward:
    """
    An administrative ward.

    Attributes:
        ward_code: Ward identifier
        borough_code: Identifier of the containing borough
        sub_region: Sub-region label
        polygon: Rings of (lat, lon) vertices; outer ring first, then holes
        area_km2: Area in square kilometres
        population: Resident population, if known
    """
    ward_code: str
    borough_code: str
    sub_region: str
    polygon: Tuple[Ring, ...]
    area_km2: float
    population: Optional[int] = None

    def __post_init__(self):
        if not self.ward_code:
            raise ValueError("ward_code cannot be empty")
        if not self.polygon:
            raise ValueError(f"ward {self.ward_code} has no polygon")
        for ring in self.polygon:
            if len(ring) < 4 or tuple(ring[0]) != tuple(ring[-1]):
                raise ValueError(f"ward {self.ward_code} has an open ring")
        if not self.area_km2 > 0:
            raise ValueError(f"ward {self.ward_code} area must be positive")
        if self.population is not None and self.population <= 0:
            raise ValueError(f"ward {self.ward_code} population must be positive")

    @property
    def outer_ring(self) -> Ring:
        return self.polygon[0]


def fiscal_start_year(label: str) -> int:
    """
    Parse a fiscal-year label such as "2010/11".

    Raises:
        ValueError: If the label is malformed or the halves are not consecutive
    """
    try:
        start, end = label.split("/")
        start_year = int(start)
        end_part = int(end)
    except (AttributeError, ValueError):
        raise ValueError(f"malformed fiscal year label: {label!r}")
    if len(start) != 4 or len(end) not in (2, 4):
        raise ValueError(f"malformed fiscal year label: {label!r}")
    expected = start_year + 1 if len(end) == 4 else (start_year + 1) % 100
    if end_part != expected:
        raise ValueError(f"fiscal year halves not consecutive: {label!r}")
    return start_year


@dataclass(frozen=True)
class PeriodMap:
    """Ordered (fiscal-year label, calendar year) pairs."""
    pairs: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("PeriodMap cannot be empty")
        labels = [label for label, _ in self.pairs]
        years = [year for _, year in self.pairs]
        if len(set(labels)) != len(labels) or len(set(years)) != len(years):
            raise ValueError("PeriodMap must be bijective")
        starts = [fiscal_start_year(label) for label in labels]
        for i in range(1, len(self.pairs)):
            if starts[i] != starts[i - 1] + 1 or years[i] != years[i - 1] + 1:
                raise ValueError("PeriodMap periods must be consecutive")

    @property
    def calendar_years(self) -> List[int]:
        return [year for _, year in self.pairs]

    @property
    def fiscal_years(self) -> List[str]:
        return [label for label, _ in self.pairs]

    def calendar_year(self, fiscal_year: str) -> int:
        for label, year in self.pairs:
            if label == fiscal_year:
                return year
        raise KeyError(fiscal_year)

    def fiscal_year(self, calendar_year: int) -> str:
        for label, year in self.pairs:
            if year == calendar_year:
                return label
        raise KeyError(calendar_year)

    def to_dict(self) -> Dict:
        return {label: year for label, year in self.pairs}


@dataclass
class Rejections:
    """Counts of dropped input rows by reason."""
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_reasons(cls, reasons: Iterable[str]) -> "Rejections":
        return cls(Counter(r for r in reasons if r))

    def add(self, reason: str, count: int = 1) -> None:
        if count:
            self.counts[reason] += count

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> Dict[str, int]:
        return dict(sorted(self.counts.items()))


@dataclass(frozen=True)
class GraphSummary:
    """Network properties of one snapshot (node/edge counts, <C>, <k>)."""
    year: int
    nodes: int
    edges: int
    mean_clustering: float
    mean_degree: float

    def __post_init__(self):
        if not 0.0 <= self.mean_clustering <= 1.0:
            raise ValueError(f"mean clustering must be 0-1, got {self.mean_clustering}")
        if self.mean_degree < 0:
            raise ValueError("mean degree must be nonnegative")

    def to_dict(self) -> Dict:
        return {
            't': self.year,
            'nodes': self.nodes,
            'edges': self.edges,
            'mean_clustering': self.mean_clustering,
            'mean_degree': self.mean_degree
        }


LEVEL_FIELDS = ("N", "IC", "OC", "IOR", "ACC", "VC", "VCD", "CVA",
                "CE", "CEA", "CEOP", "CECH", "CELS", "CERS", "CET")


@dataclass(frozen=True)
class WardMetricsRow:
    """
    Level metrics for one ward in one period.

    Missing values are None; IOR is None whenever OC is zero and 0.0 when
    a ward only sends flow.
    """
    ward_code: str
    period: int
    N: int
    IC: float
    OC: float
    IOR: Optional[float]
    ACC: float
    VC: int
    VCD: float
    CVA: Optional[float]
    CE: Optional[float]
    CEA: Optional[float]
    CEOP: Optional[float]
    CECH: Optional[float]
    CELS: Optional[float]
    CERS: Optional[float]
    CET: Optional[float]

    def __post_init__(self):
        for name in ("N", "IC", "OC", "VC"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 <= self.ACC <= 1.0:
            raise ValueError(f"ACC must be 0-1, got {self.ACC}")
        if self.IOR is not None and self.IOR < 0:
            raise ValueError("IOR must be nonnegative when present")

    @classmethod
    def from_mapping(cls, ward_code: str, period: int, values: Mapping) -> "WardMetricsRow":
        return cls(
            ward_code=ward_code,
            period=int(period),
            N=int(values["N"]),
            IC=float(values["IC"]),
            OC=float(values["OC"]),
            IOR=_opt(values["IOR"]),
            ACC=float(values["ACC"]),
            VC=int(values["VC"]),
            VCD=float(values["VCD"]),
            CVA=_opt(values["CVA"]),
            CE=_opt(values["CE"]),
            CEA=_opt(values["CEA"]),
            CEOP=_opt(values["CEOP"]),
            CECH=_opt(values["CECH"]),
            CELS=_opt(values["CELS"]),
            CERS=_opt(values["CERS"]),
            CET=_opt(values["CET"]),
        )


GROWTH_FIELDS = ("GRN", "GRI", "GRO", "GRIOR", "GRACC", "GRVC")


@dataclass(frozen=True)
class GrowthRow:
    """Year-over-year growth rates for one ward; None where undefined."""
    ward_code: str
    period: int
    GRN: Optional[float]
    GRI: Optional[float]
    GRO: Optional[float]
    GRIOR: Optional[float]
    GRACC: Optional[float]
    GRVC: Optional[float]

    def __post_init__(self):
        for name in GROWTH_FIELDS:
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def from_mapping(cls, ward_code: str, period: int, values: Mapping) -> "GrowthRow":
        return cls(ward_code, int(period), *(_opt(values[name]) for name in GROWTH_FIELDS))


@dataclass(frozen=True)
class Cohort:
    """Group membership of one ward."""
    ward_code: str
    group: CohortGroup


@dataclass(frozen=True)
class AnovaResult:
    """
    One F test.

    Attributes:
        effect: Effect name ("group", "time", "group:time")
        F: F statistic (inf when the error term vanishes but the effect does not)
        df1, df2: Numerator and denominator degrees of freedom
        p: Upper-tail probability
        degenerate: True when the error variance is zero
    """
    effect: str
    F: float
    df1: int
    df2: int
    p: float
    degenerate: bool = False

    def __post_init__(self):
        if self.F < 0:
            raise ValueError(f"F must be nonnegative, got {self.F}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be 0-1, got {self.p}")
        if self.df1 < 1 or self.df2 < 1:
            raise ValueError("degrees of freedom must be positive")

    def to_dict(self) -> Dict:
        return {
            'effect': self.effect,
            'F': self.F if math.isfinite(self.F) else None,
            'df1': self.df1,
            'df2': self.df2,
            'p': self.p,
            'degenerate': self.degenerate
        }


@dataclass(frozen=True)
class PanelObservation:
    """One ward's value of a variable in one year."""
    ward_code: str
    group: CohortGroup
    year: int
    value: float


FeatureValue = Union[float, str]


@dataclass(frozen=True)
class LabeledSample:
    """
    Prediction features and deprivation-change label for one ward.

    Attributes:
        ward_code: Ward identifier
        features: Feature name -> value (SubRegion is categorical)
        label: IMPROVED when the IMD rank increased between editions
        delta_rank: rank_2015 - rank_2010 (nonzero)
    """
    ward_code: str
    features: Mapping[str, FeatureValue]
    label: ChangeLabel
    delta_rank: int

    def __post_init__(self):
        if self.delta_rank == 0:
            raise ValueError("zero rank change cannot be labeled")
        expected = ChangeLabel.IMPROVED if self.delta_rank > 0 else ChangeLabel.WORSENED
        if self.label is not expected:
            raise ValueError(f"label {self.label.value} contradicts delta {self.delta_rank}")


@dataclass(frozen=True)
class EvaluationRow:
    """Cross-validated metrics of one (classifier, subset, feature set)."""
    classifier: str
    threshold: int
    feature_set: str
    auc: Optional[float]
    accuracy: float
    precision: float
    folds: int
    samples: int
    skipped_auc_folds: int = 0

    def __post_init__(self):
        for name in ("accuracy", "precision"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be 0-1")
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must be 0-1")

    def to_dict(self) -> Dict:
        return {
            'classifier': self.classifier,
            'threshold': self.threshold,
            'feature_set': self.feature_set,
            'auc': self.auc,
            'accuracy': self.accuracy,
            'precision': self.precision,
            'folds': self.folds,
            'samples': self.samples,
            'skipped_auc_folds': self.skipped_auc_folds
        }


@dataclass
class EvaluationReport:
    """A collection of evaluation rows."""
    rows: List[EvaluationRow] = field(default_factory=list)

    def extend(self, other: "EvaluationReport") -> None:
        self.rows.extend(other.rows)

    def get(self, classifier: str, threshold: int = 0,
            feature_set: str = "full") -> EvaluationRow:
        for row in self.rows:
            if (row.classifier, row.threshold, row.feature_set) == (classifier, threshold, feature_set):
                return row
        raise KeyError((classifier, threshold, feature_set))

    def to_frame(self) -> pd.DataFrame:
        columns = list(EvaluationRow.__dataclass_fields__)
        return pd.DataFrame([row.to_dict() for row in self.rows], columns=columns)

    def to_dict(self) -> Dict:
        return {'rows': [row.to_dict() for row in self.rows]}

