"""
Prediction features and deprivation-change labels.

Each ward gets sixteen features in four classes and is labeled improved
when its IMD rank rose between the 2010 and 2015 editions (rank 1 is the
most deprived ward).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from ..core.models import ChangeLabel, LabeledSample, Rejections, Ward
from ..ingest.readers import DeprivationTable
from ..ingest.spatial import LatLon, ward_centroid_distance
from ..metrics.panel import PER_CAPITA_FEATURES, WardMetricsPanel
from ..metrics.ward_metrics import growth_series

logger = structlog.get_logger(__name__)

FEATURE_CLASSES: Dict[str, Tuple[str, ...]] = {
    "initial": ("InitialIMD",),
    "geographic": ("SubRegion", "Area", "Distance", "GRVC"),
    "network": ("GRN", "GRI", "GRO", "GRIOR", "GRACC"),
    "expenditure": ("CEA", "CEOP", "CECH", "CELS", "CERS", "CET"),
}
FEATURE_NAMES: Tuple[str, ...] = tuple(name for names in FEATURE_CLASSES.values() for name in names)
CATEGORICAL_FEATURES = ("SubRegion",)

FEATURE_SETS: Dict[str, Tuple[str, ...]] = {
    "full": FEATURE_NAMES,
    **{
        f"minus_{cls}": tuple(n for n in FEATURE_NAMES if n not in FEATURE_CLASSES[cls])
        for cls in ("geographic", "network", "expenditure")
    },
}

# growth features: endpoint ratio of these panel variables
ENDPOINT_GROWTH = {"GRVC": "VC", "GRN": "N", "GRI": "IC", "GRO": "OC", "GRIOR": "IOR", "GRACC": "ACC"}
PERIOD_MEANS = ("CEA", *PER_CAPITA_FEATURES)

POSITIVE = 1
NEGATIVE = 0


@dataclass(frozen=True)
class LabeledDataset:
    """Labeled samples in ward_code order plus exclusion counts."""
    samples: Tuple[LabeledSample, ...]
    exclusions: Rejections = field(default_factory=Rejections)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def ward_codes(self) -> List[str]:
        return [s.ward_code for s in self.samples]

    def features(self, feature_set: str = "full") -> pd.DataFrame:
        """Feature frame indexed by ward_code with the columns of a feature set."""
        try:
            columns = list(FEATURE_SETS[feature_set])
        except KeyError:
            raise KeyError(f"unknown feature set: {feature_set}") from None
        frame = pd.DataFrame([dict(s.features) for s in self.samples], columns=list(FEATURE_NAMES),
                             index=pd.Index(self.ward_codes, name="ward_code"))
        frame = frame[columns]
        for name in columns:
            if name not in CATEGORICAL_FEATURES:
                frame[name] = frame[name].astype(float)
        return frame

    def labels(self) -> np.ndarray:
        """1 for improved, 0 for worsened."""
        return np.array([POSITIVE if s.label is ChangeLabel.IMPROVED else NEGATIVE
                         for s in self.samples], dtype=np.int64)

    def deltas(self) -> np.ndarray:
        return np.array([s.delta_rank for s in self.samples], dtype=np.int64)

    def class_counts(self) -> Dict[str, int]:
        labels = self.labels()
        return {ChangeLabel.IMPROVED.value: int(labels.sum()),
                ChangeLabel.WORSENED.value: int(len(labels) - labels.sum())}


def _endpoint_features(panel: WardMetricsPanel) -> pd.DataFrame:
    first, last = panel.first_period, panel.last_period
    features = pd.DataFrame(index=pd.Index(panel.wards, name="ward_code"))
    for name, source in ENDPOINT_GROWTH.items():
        table = panel.variable(source)
        if first == last:
            features[name] = np.nan
        else:
            features[name] = growth_series(table[first], table[last])
    for name in PERIOD_MEANS:
        features[name] = panel.period_mean(name, skipna=False)
    return features


def assemble_dataset(panel: WardMetricsPanel, imd: DeprivationTable, wards: Sequence[Ward],
                     centre: LatLon) -> LabeledDataset:
    """
    Build one labeled sample per usable ward.

    Growth features compare the last panel period to the first; spending
    features are means over all periods. Wards missing an IMD edition, with
    an unchanged rank, or with any missing feature are excluded and counted.
    """
    by_code = {w.ward_code: w for w in wards}
    endpoint = _endpoint_features(panel)
    imd_2010 = imd.edition(2010)
    imd_2015 = imd.edition(2015)

    exclusions = Rejections()
    samples: List[LabeledSample] = []
    for ward_code in sorted(panel.wards):
        ward = by_code.get(ward_code)
        if ward is None:
            exclusions.add("unknown ward")
            continue
        if ward_code not in imd_2010.index:
            exclusions.add("missing imd 2010")
            continue
        if ward_code not in imd_2015.index:
            exclusions.add("missing imd 2015")
            continue
        rank_2010 = int(imd_2010.at[ward_code, "rank"])
        delta = int(imd_2015.at[ward_code, "rank"]) - rank_2010
        if delta == 0:
            exclusions.add("zero rank change")
            continue

        values: Dict[str, object] = {
            'InitialIMD': float(rank_2010),
            'SubRegion': ward.sub_region,
            'Area': ward.area_km2,
            'Distance': ward_centroid_distance(ward, centre),
        }
        values.update({name: float(endpoint.at[ward_code, name]) for name in endpoint.columns})
        if any(isinstance(v, float) and not np.isfinite(v) for v in values.values()) or not ward.sub_region:
            exclusions.add("missing feature")
            continue

        label = ChangeLabel.IMPROVED if delta > 0 else ChangeLabel.WORSENED
        samples.append(LabeledSample(ward_code, {n: values[n] for n in FEATURE_NAMES}, label, delta))

    dataset = LabeledDataset(tuple(samples), exclusions)
    logger.info("dataset_assembled", samples=len(dataset), excluded=exclusions.to_dict(),
                classes=dataset.class_counts())
    return dataset


def subset_by_change(dataset: LabeledDataset, threshold: int) -> LabeledDataset:
    """Samples with |delta_rank| > threshold (exclusion counts carried over)."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    kept = tuple(s for s in dataset.samples if abs(s.delta_rank) > threshold)
    return LabeledDataset(kept, dataset.exclusions)
