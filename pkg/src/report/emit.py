"""
Plot-ready report tables.

Every writer produces UTF-8 output: CSVs through pandas with empty fields
for missing values, JSON with sorted keys, a ``spec_version`` field and
null in place of NaN or infinity.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from ..cohort.groups import CohortTable
from ..core.config import config
from ..core.models import CohortGroup, Ward
from ..graph.snapshot import SnapshotGraph, dump_edges, summarize
from ..ingest.readers import DeprivationTable
from ..metrics.panel import WardMetricsPanel
from ..predict.dataset import LabeledDataset, subset_by_change

logger = structlog.get_logger(__name__)

CHANGE_BIN_WIDTH = 10


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(payload: Mapping, path) -> Path:
    """Write a JSON report; ``spec_version`` is added when absent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'spec_version': config.SPEC_VERSION, **_clean(dict(payload))}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, sort_keys=True, indent=2, allow_nan=False)
        f.write("\n")
    return path


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, na_rep="", lineterminator="\n", encoding="utf-8")
    return path


def quadrant(cea: float, cva: float) -> str:
    """Quadrant label around CEA = 1, CVA = 1; values at 1 count as low."""
    cea_side = "high" if cea > 1.0 else "low"
    cva_side = "high" if cva > 1.0 else "low"
    return f"{cea_side}-CEA/{cva_side}-CVA"


def emit_scatter_data(panel: WardMetricsPanel, imd: DeprivationTable) -> pd.DataFrame:
    """
    Initial IMD score against first-period CEA and CVA, one row per area.

    Areas without a 2010 IMD score or without both ratios are left out.
    """
    first = panel.first_period
    cea = panel.variable("CEA")[first]
    cva = panel.variable("CVA")[first]
    imd_2010 = imd.edition(2010)
    rows = []
    for ward_code in sorted(panel.wards):
        if ward_code not in imd_2010.index:
            continue
        a, v = cea.get(ward_code, np.nan), cva.get(ward_code, np.nan)
        if pd.isna(a) or pd.isna(v):
            continue
        rows.append({
            'area': ward_code,
            'CEA': float(a),
            'CVA': float(v),
            'imd_score': float(imd_2010.at[ward_code, "score"]),
            'quadrant': quadrant(float(a), float(v)),
        })
    frame = pd.DataFrame(rows, columns=["area", "CEA", "CVA", "imd_score", "quadrant"])
    logger.info("scatter_emitted", rows=len(frame), period=first)
    return frame


def emit_group_means(panel: WardMetricsPanel, cohorts: CohortTable,
                     variables: Optional[Sequence[str]] = None,
                     anova: Optional[Mapping] = None) -> pd.DataFrame:
    """
    Mean of each variable per (group, year) with the all-ward reference mean.

    Args:
        panel: Metrics panel
        cohorts: Cohort assignment
        variables: Variables to include (defaults to config.ANOVA_VARIABLES)
        anova: An anova_report; when given, only variables with at least one
            significant effect are kept

    Returns:
        Frame with columns group, variable, year, mean, n, all_ward_mean,
        empty. A group with no observations has a missing mean and empty=True.
    """
    variables = list(variables or config.ANOVA_VARIABLES)
    if anova is not None:
        variables = [v for v in variables if _has_significant_effect(anova, v)]
    group_of = {c.ward_code: c.group.value for c in cohorts.cohorts}
    rows = []
    for variable in variables:
        table = panel.variable(variable)
        table = table[table.index.isin(list(group_of))]
        groups = pd.Series(group_of).reindex(table.index)
        for year in panel.periods:
            values = table[year]
            reference = values.mean()
            for group in CohortGroup:
                selected = values[groups == group.value].dropna()
                rows.append({
                    'group': group.value,
                    'variable': variable,
                    'year': int(year),
                    'mean': float(selected.mean()) if len(selected) else np.nan,
                    'n': int(len(selected)),
                    'all_ward_mean': float(reference) if pd.notna(reference) else np.nan,
                    'empty': len(selected) == 0,
                })
    frame = pd.DataFrame(rows, columns=["group", "variable", "year", "mean", "n",
                                        "all_ward_mean", "empty"])
    empty = int(frame["empty"].sum()) if len(frame) else 0
    if empty:
        logger.warning("group_means_empty_cells", cells=empty)
    return frame


def _has_significant_effect(anova: Mapping, variable: str) -> bool:
    entry = anova.get('variables', {}).get(variable, {})
    effects = [entry.get('one_way')] + list(entry.get('mixed', []))
    return any(e and e.get('significant') for e in effects)


def emit_borough_overview(panel: WardMetricsPanel, imd: DeprivationTable,
                          wards: Sequence[Ward]) -> pd.DataFrame:
    """
    Borough-level view of deprivation, advantage and change.

    Per borough: mean 2010 IMD score of its wards, mean first-period CEA
    and CVA, and the last minus first period change of cultural expenditure
    (CE), venue creation (VC), in-flow (IC) and out-flow (OC), each summed
    over the borough's wards.
    """
    first, last = panel.first_period, panel.last_period
    boroughs = pd.Series({w.ward_code: w.borough_code for w in wards}, name="borough_code")
    codes = [c for c in panel.wards if c in boroughs.index]
    imd_2010 = imd.edition(2010)

    frame = pd.DataFrame(index=pd.Index(codes, name="ward_code"))
    frame["borough_code"] = boroughs.reindex(codes)
    frame["imd_score"] = imd_2010["score"].reindex(codes)
    frame["CEA"] = panel.variable("CEA")[first].reindex(codes)
    frame["CVA"] = panel.variable("CVA")[first].reindex(codes)
    for name in ("CE", "VC", "IC", "OC"):
        table = panel.variable(name).reindex(codes)
        frame[f"{name}_first"] = table[first]
        frame[f"{name}_last"] = table[last]

    grouped = frame.groupby("borough_code", sort=True)
    overview = pd.DataFrame({
        'wards': grouped.size(),
        'imd_score_2010_mean': grouped["imd_score"].mean(),
        'CEA_mean': grouped["CEA"].mean(),
        'CVA_mean': grouped["CVA"].mean(),
    })
    for name in ("CE", "VC", "IC", "OC"):
        before = grouped[f"{name}_first"].sum(min_count=1)
        after = grouped[f"{name}_last"].sum(min_count=1)
        overview[f"{name}_change"] = after - before
    return overview.reset_index()


def emit_change_distribution(dataset: LabeledDataset,
                             thresholds: Sequence[int]) -> Tuple[pd.DataFrame, Dict]:
    """
    Histogram of IMD rank change and the size of each |delta| subset.

    Returns:
        (bins, summary). Bins cover [start, start + 10) of delta_rank. The
        summary holds subset sizes per threshold plus the largest
        improvement and the largest decline.
    """
    deltas = pd.Series(dataset.deltas(), index=dataset.ward_codes, dtype=np.int64)
    if len(deltas):
        starts = (np.floor_divide(deltas.to_numpy(), CHANGE_BIN_WIDTH) * CHANGE_BIN_WIDTH)
        counts = pd.Series(starts).value_counts().sort_index()
        bins = pd.DataFrame({
            'bin_start': counts.index.astype(np.int64),
            'bin_end': counts.index.astype(np.int64) + CHANGE_BIN_WIDTH,
            'count': counts.to_numpy(dtype=np.int64),
        })
    else:
        bins = pd.DataFrame(columns=["bin_start", "bin_end", "count"])

    subsets = []
    for threshold in thresholds:
        subset = subset_by_change(dataset, threshold)
        subsets.append({'threshold': int(threshold), 'samples': len(subset), **subset.class_counts()})
    summary: Dict[str, Any] = {'samples': len(dataset), 'subsets': subsets,
                               'largest_improvement': None, 'largest_decline': None}
    if len(deltas):
        best, worst = deltas.idxmax(), deltas.idxmin()
        if deltas[best] > 0:
            summary['largest_improvement'] = {'ward_code': best, 'delta_rank': int(deltas[best])}
        if deltas[worst] < 0:
            summary['largest_decline'] = {'ward_code': worst, 'delta_rank': int(deltas[worst])}
    return bins, summary


def emit_graph_summaries(graphs: Mapping[int, SnapshotGraph], directory) -> List[Path]:
    """
    Write graph_summary.json (one entry per year) and edges_<year>.csv files.

    Returns:
        Paths written, summary first
    """
    directory = Path(directory)
    summaries = [summarize(graphs[year]).to_dict() for year in sorted(graphs)]
    paths = [write_json({'snapshots': summaries}, directory / "graph_summary.json")]
    for year in sorted(graphs):
        paths.append(dump_edges(graphs[year], directory / f"edges_{year}.csv"))
    logger.info("graph_summaries_emitted", years=sorted(graphs))
    return paths
