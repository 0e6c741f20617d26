"""
Brute-force reference computations for synthetic bundles.

Everything here works from the generator's in-memory tables with plain
loops and dictionaries: no spatial index, no sparse matrices, no panel
machinery. Tests compare the pipeline against these.
"""

from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.config import config
from ..core.models import GROWTH_FIELDS, UNASSIGNED, ExpenditureCategory
from ..metrics.panel import LEVEL_FIELDS, WardMetricsPanel
from .generator import SynthBundle

PER_CAPITA = {
    "CEOP": "open_spaces",
    "CECH": "culture_heritage",
    "CELS": "library_service",
    "CERS": "recreation_sport",
    "CET": "tourism",
}
CULTURAL = [c.value for c in ExpenditureCategory.cultural()]


def _on_segment(x, y, x1, y1, x2, y2) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if cross != 0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def point_in_ring(x: float, y: float, ring: Sequence[Tuple[float, float]]) -> bool:
    """Even-odd ray casting; points on an edge count as inside."""
    n = len(ring)
    for i in range(n - 1):
        if _on_segment(x, y, *ring[i], *ring[i + 1]):
            return True
    inside = False
    p1x, p1y = ring[0]
    for i in range(1, n + 1):
        p2x, p2y = ring[i % n]
        if (p1y > y) != (p2y > y):
            xints = (y - p1y) * (p2x - p1x) / (p2y - p1y) + p1x
            if x < xints:
                inside = not inside
        p1x, p1y = p2x, p2y
    return inside


def point_in_polygon(x: float, y: float, rings: Sequence[Sequence[Tuple[float, float]]]) -> bool:
    if not point_in_ring(x, y, rings[0]):
        return False
    for hole in rings[1:]:
        if point_in_ring(x, y, hole) and not any(
            _on_segment(x, y, *hole[i], *hole[i + 1]) for i in range(len(hole) - 1)
        ):
            return False
    return True


def oracle_assign(points: Dict[str, Tuple[float, float]],
                  wards: Dict[str, Sequence[Sequence[Tuple[float, float]]]]) -> Dict[str, str]:
    """
    Venue id -> ward code by scanning every ward in code order.

    Args:
        points: Venue id -> (lon, lat)
        wards: Ward code -> rings of (lon, lat)
    """
    result = {}
    ordered = sorted(wards)
    for venue_id, (x, y) in points.items():
        result[venue_id] = next((code for code in ordered if point_in_polygon(x, y, wards[code])),
                                UNASSIGNED)
    return result


def _local_clustering(node, successors, neighbours) -> float:
    nbrs = neighbours[node]
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = sum(1 for j in nbrs for l in nbrs if j != l and l in successors[j])
    return links / (k * (k - 1))


def _fiscal_label(year: int) -> str:
    start = year - config.FISCAL_OFFSET
    return f"{start}/{(start + 1) % 100:02d}"


def _ratio_to_city(part: Dict[str, float], whole: Dict[str, float]) -> Dict[str, float]:
    usable = [w for w in whole if whole[w] > 0]
    total_part = sum(part[w] for w in usable)
    total_whole = sum(whole[w] for w in usable)
    result = {w: float("nan") for w in whole}
    if total_whole > 0 and total_part > 0:
        city = total_part / total_whole
        for w in usable:
            result[w] = (part[w] / whole[w]) / city
    return result


def _growth(prev: Optional[float], curr: Optional[float]) -> float:
    if prev is None or curr is None or np.isnan(prev) or np.isnan(curr) or prev <= 0:
        return float("nan")
    return curr / prev


def oracle_ward_metrics(bundle: SynthBundle) -> WardMetricsPanel:
    """
    Recompute every panel variable by direct scans.

    Returns:
        WardMetricsPanel with the same columns and index as the real one
    """
    ward_rings = {}
    ward_info = {}
    for feature in bundle.wards["features"]:
        props = feature["properties"]
        ring_sets = [[tuple(p[:2]) for p in ring] for ring in feature["geometry"]["coordinates"]]
        ward_rings[props["ward_code"]] = ring_sets
        ward_info[props["ward_code"]] = props
    codes = sorted(ward_rings)

    venues = bundle.venues
    points = {row.id: (row.lon, row.lat) for row in venues.itertuples(index=False)}
    ward_of = oracle_assign(points, ward_rings)
    created_year = {row.id: row.created_at.year for row in venues.itertuples(index=False)}
    cultural = {row.id: bool(row.is_cultural) for row in venues.itertuples(index=False)}

    borough_wards = defaultdict(list)
    for code in codes:
        borough_wards[ward_info[code]["borough_code"]].append(code)
    borough_population = {}
    for borough, members in borough_wards.items():
        pops = [ward_info[w].get("population") for w in members]
        borough_population[borough] = float(sum(pops)) if all(p for p in pops) else float("nan")
    spend = {}
    for row in bundle.expenditure.itertuples(index=False):
        spend[(row.borough_code, row.fiscal_year, row.category)] = float(row.amount)

    records: List[Dict] = []
    previous: Dict[str, Dict] = {}
    for year in bundle.config.years:
        edges = Counter()
        for row in bundle.transitions.itertuples(index=False):
            if row.t_origin.year == year:
                edges[(row.origin_venue, row.dest_venue)] += 1
        nodes = {v for edge in edges for v in edge}
        successors = defaultdict(set)
        neighbours = defaultdict(set)
        for (o, d) in edges:
            if o != d:
                successors[o].add(d)
                neighbours[o].add(d)
                neighbours[d].add(o)

        n_count = {c: 0 for c in codes}
        clustering_sum = {c: 0.0 for c in codes}
        for node in nodes:
            w = ward_of[node]
            if w != UNASSIGNED:
                n_count[w] += 1
                clustering_sum[w] += _local_clustering(node, successors, neighbours)
        ic = {c: 0.0 for c in codes}
        oc = {c: 0.0 for c in codes}
        for (o, d), weight in edges.items():
            wo, wd = ward_of[o], ward_of[d]
            if wo != wd and wo != UNASSIGNED and wd != UNASSIGNED:
                oc[wo] += weight
                ic[wd] += weight

        vc = {c: 0 for c in codes}
        cv = {c: 0.0 for c in codes}
        tv = {c: 0.0 for c in codes}
        for venue_id, w in ward_of.items():
            if w == UNASSIGNED:
                continue
            if created_year[venue_id] == year:
                vc[w] += 1
            if created_year[venue_id] <= year:
                tv[w] += 1
                cv[w] += cultural[venue_id]
        cva = _ratio_to_city(cv, tv)

        fiscal = _fiscal_label(year)
        ce, te, per_capita = {}, {}, {}
        for c in codes:
            borough = ward_info[c]["borough_code"]
            size = len(borough_wards[borough])
            amounts = {cat: spend.get((borough, fiscal, cat), float("nan")) for cat in
                       CULTURAL + [ExpenditureCategory.TOTAL_SERVICES.value]}
            ce[c] = sum(amounts[cat] / size for cat in CULTURAL)
            te[c] = amounts[ExpenditureCategory.TOTAL_SERVICES.value] / size
            per_capita[c] = {
                name: (amounts[cat] / size) / (borough_population[borough] / size)
                for name, cat in PER_CAPITA.items()
            }
        cea = _ratio_to_city(ce, te)

        current = {}
        for c in codes:
            area = float(ward_info[c]["area_km2"])
            values = {
                'N': n_count[c],
                'IC': ic[c],
                'OC': oc[c],
                'IOR': ic[c] / oc[c] if oc[c] != 0 else float("nan"),
                'ACC': clustering_sum[c] / n_count[c] if n_count[c] else 0.0,
                'VC': vc[c],
                'VCD': vc[c] / area,
                'CVA': cva[c],
                'CE': ce[c],
                'CEA': cea[c],
                **per_capita[c],
            }
            before = previous.get(c)
            for name, source in (("GRN", "N"), ("GRI", "IC"), ("GRO", "OC"), ("GRIOR", "IOR"),
                                 ("GRACC", "ACC"), ("GRVC", "VC")):
                values[name] = _growth(before[source], values[source]) if before else float("nan")
            current[c] = values
            records.append({'ward_code': c, 'period': year, **values})
        previous = current

    frame = pd.DataFrame(records).set_index(["ward_code", "period"]).sort_index()
    return WardMetricsPanel(frame[list(LEVEL_FIELDS) + list(GROWTH_FIELDS)], tuple(bundle.config.years))


def oracle_label_counts(ledger: Dict, threshold: int = 0,
                        wards: Optional[Iterable[str]] = None) -> Dict[str, int]:
    """
    Improved/worsened counts among wards with |delta rank| > threshold, from the ledger.

    ``wards`` restricts the count, e.g. to the wards that kept every feature.
    """
    keep = None if wards is None else set(wards)
    counts = {"improved": 0, "worsened": 0}
    for code, entry in ledger["imd"].items():
        if keep is not None and code not in keep:
            continue
        delta = entry["delta"]
        if abs(delta) > threshold:
            counts["improved" if delta > 0 else "worsened"] += 1
    return counts
