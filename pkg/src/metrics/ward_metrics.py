"""
Ward-level network and venue metrics.

Scalar functions answer for one ward; the ``*_by_ward`` variants compute
the same quantity for every ward at once and are what the panel uses.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.models import UNASSIGNED, Ward, is_missing
from ..graph.snapshot import SnapshotGraph, clustering_vector
from ..ingest.spatial import VenueWardIndex


def node_wards(graph: SnapshotGraph, index: VenueWardIndex) -> np.ndarray:
    """Ward code of every graph node, in node order."""
    return index.wards_for(graph.nodes)


def cross_ward_flows(graph: SnapshotGraph, index: VenueWardIndex) -> pd.DataFrame:
    """
    IC and OC of every ward in the index.

    IC sums the weights of edges entering the ward from a venue in another
    ward; OC sums the weights leaving it. Intra-ward edges and edges with an
    unassigned endpoint are ignored.
    """
    wards = node_wards(graph, index)
    coo = graph.weights.tocoo()
    origin = wards[coo.row]
    dest = wards[coo.col]
    cross = (origin != dest) & (origin != UNASSIGNED) & (dest != UNASSIGNED)
    weight = coo.data[cross].astype(float)
    codes = list(index.ward_codes)
    ic = pd.Series(weight, index=dest[cross]).groupby(level=0).sum().reindex(codes, fill_value=0.0)
    oc = pd.Series(weight, index=origin[cross]).groupby(level=0).sum().reindex(codes, fill_value=0.0)
    return pd.DataFrame({"IC": ic, "OC": oc}, index=pd.Index(codes, name="ward_code"))


def ward_centralities(graph: SnapshotGraph, index: VenueWardIndex, ward: str) -> Tuple[float, float]:
    """(IC, OC) of one ward; (0, 0) for a ward with no venues."""
    flows = cross_ward_flows(graph, index)
    if ward not in flows.index:
        return 0.0, 0.0
    return float(flows.at[ward, "IC"]), float(flows.at[ward, "OC"])


def ior(ic: Optional[float], oc: Optional[float]) -> Optional[float]:
    """In-flow over out-flow; None when OC is zero or either value is missing."""
    if is_missing(ic) or is_missing(oc) or oc == 0:
        return None
    return ic / oc


def ior_series(ic: pd.Series, oc: pd.Series) -> pd.Series:
    return (ic / oc.where(oc != 0)).astype(float)


def node_counts_by_ward(graph: SnapshotGraph, index: VenueWardIndex) -> pd.Series:
    """N: graph nodes located in each ward."""
    wards = pd.Series(node_wards(graph, index))
    return wards[wards != UNASSIGNED].value_counts().reindex(list(index.ward_codes), fill_value=0)


def acc_by_ward(graph: SnapshotGraph, index: VenueWardIndex,
                clustering: Optional[np.ndarray] = None) -> pd.Series:
    """ACC: mean whole-graph local clustering of the nodes in each ward, 0 without nodes."""
    if clustering is None:
        clustering = clustering_vector(graph)
    frame = pd.DataFrame({"ward": node_wards(graph, index), "C": clustering})
    frame = frame[frame["ward"] != UNASSIGNED]
    return frame.groupby("ward")["C"].mean().reindex(list(index.ward_codes), fill_value=0.0)


def ward_acc(graph: SnapshotGraph, index: VenueWardIndex, ward: str) -> float:
    acc = acc_by_ward(graph, index)
    return float(acc.get(ward, 0.0))


def _created_in(venues: pd.DataFrame, year: int) -> pd.Series:
    return venues["created_at"].dt.year == year


def venue_creation_by_ward(venues: pd.DataFrame, index: VenueWardIndex, year: int) -> pd.Series:
    """VC: venues created during the calendar year, per ward."""
    created = venues.index[_created_in(venues, year)]
    wards = pd.Series(index.wards_for(created))
    return wards[wards != UNASSIGNED].value_counts().reindex(list(index.ward_codes), fill_value=0)


def venue_creation(venues: pd.DataFrame, index: VenueWardIndex, period: int,
                   ward: Ward) -> Tuple[int, float]:
    """(VC, VCD) of one ward: venues created in the period and the same per km²."""
    vc = int(venue_creation_by_ward(venues, index, period).get(ward.ward_code, 0))
    return vc, vc / ward.area_km2


def venue_stock_by_ward(venues: pd.DataFrame, index: VenueWardIndex,
                        year: int) -> pd.DataFrame:
    """Cultural and total venues existing by the end of the year, per ward."""
    existing = venues[venues["created_at"].dt.year <= year]
    frame = pd.DataFrame({
        "ward": index.wards_for(existing.index),
        "cultural": existing["is_cultural"].to_numpy(dtype=bool),
    })
    frame = frame[frame["ward"] != UNASSIGNED]
    grouped = frame.groupby("ward")["cultural"]
    codes = list(index.ward_codes)
    return pd.DataFrame({
        "CV": grouped.sum().reindex(codes, fill_value=0).astype(np.int64),
        "TV": grouped.size().reindex(codes, fill_value=0).astype(np.int64),
    })


def growth_rate(prev: Optional[float], curr: Optional[float]) -> Optional[float]:
    """curr / prev; None when prev <= 0 or either value is missing."""
    if is_missing(prev) or is_missing(curr) or prev <= 0:
        return None
    return curr / prev


def growth_series(prev: pd.Series, curr: pd.Series) -> pd.Series:
    prev = prev.astype(float)
    return curr.astype(float) / prev.where(prev > 0)


def area_series(wards: Sequence[Ward]) -> pd.Series:
    return pd.Series({w.ward_code: w.area_km2 for w in wards}, dtype=float)
