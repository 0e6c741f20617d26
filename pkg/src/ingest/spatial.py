"""
Spatial joins and distances.

- VenueWardIndex: venue id -> ward code ("unassigned" outside every ward)
- assign_venues_to_wards: point-in-polygon join, boundary points count as inside
- ward_centroid: area centroid on a local equirectangular projection
- great_circle_km / ward_centroid_distance: distances to the city centre
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
import shapely
import structlog
from geopy.distance import great_circle
from shapely.geometry import Polygon
from shapely.strtree import STRtree

from ..core.models import UNASSIGNED, Ward

logger = structlog.get_logger(__name__)

LatLon = Tuple[float, float]


@dataclass(frozen=True)
class VenueWardIndex:
    """
    Venue-to-ward assignment.

    Attributes:
        assignment: Series venue id -> ward code or UNASSIGNED, sorted by venue id
        ward_codes: All ward codes in stable order
    """
    assignment: pd.Series
    ward_codes: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.assignment)

    def ward_of(self, venue_id: str) -> str:
        return self.assignment.get(venue_id, UNASSIGNED)

    def wards_for(self, venue_ids: Sequence[str]) -> np.ndarray:
        """Ward codes for many venues; unknown venues map to UNASSIGNED."""
        return (
            self.assignment.reindex(pd.Index(venue_ids)).fillna(UNASSIGNED).to_numpy(dtype=object)
        )

    def venues_in(self, ward_code: str) -> List[str]:
        return self.assignment.index[self.assignment == ward_code].tolist()

    @property
    def unassigned_count(self) -> int:
        return int((self.assignment == UNASSIGNED).sum())

    def counts(self) -> pd.Series:
        """Assigned venue counts per ward, zero-filled, in ward order."""
        assigned = self.assignment[self.assignment != UNASSIGNED]
        return assigned.value_counts().reindex(list(self.ward_codes), fill_value=0)


def ward_polygon(ward: Ward) -> Polygon:
    """Shapely polygon in (lon, lat) axis order."""
    rings = [[(lon, lat) for lat, lon in ring] for ring in ward.polygon]
    return Polygon(rings[0], rings[1:])


def assign_venues_to_wards(venues: pd.DataFrame, wards: Sequence[Ward]) -> VenueWardIndex:
    """
    Assign every venue to the ward containing it.

    Points on a ward boundary count as inside. A point covered by several
    wards goes to the smallest ward_code, so the result does not depend on
    input order.

    Args:
        venues: Frame indexed by venue id with lat and lon columns
        wards: Wards with valid polygons

    Returns:
        VenueWardIndex covering every venue
    """
    ordered = sorted(wards, key=lambda w: w.ward_code)
    codes = np.array([w.ward_code for w in ordered], dtype=object)
    venue_ids = np.sort(venues.index.to_numpy(dtype=object))
    located = venues.loc[venue_ids]

    result = np.full(len(venue_ids), UNASSIGNED, dtype=object)
    if len(ordered) and len(venue_ids):
        tree = STRtree([ward_polygon(w) for w in ordered])
        points = shapely.points(located["lon"].to_numpy(dtype=float),
                                located["lat"].to_numpy(dtype=float))
        point_idx, ward_idx = tree.query(points, predicate="covered_by")
        first = np.full(len(venue_ids), len(ordered), dtype=np.int64)
        np.minimum.at(first, point_idx, ward_idx)
        hit = first < len(ordered)
        result[hit] = codes[first[hit]]

    index = VenueWardIndex(pd.Series(result, index=pd.Index(venue_ids, name="id"), name="ward_code"),
                           tuple(codes))
    logger.info("venues_assigned", venues=len(index), wards=len(ordered),
                unassigned=index.unassigned_count)
    return index


@dataclass(frozen=True)
class Centroid:
    lat: float
    lon: float
    degenerate: bool = False


def _vertex_mean(ring) -> LatLon:
    vertices = np.asarray(ring[:-1] if len(ring) > 1 and tuple(ring[0]) == tuple(ring[-1]) else ring,
                          dtype=float)
    return float(vertices[:, 0].mean()), float(vertices[:, 1].mean())


def ward_centroid(ward: Ward) -> Centroid:
    """
    Area centroid of a ward polygon (holes respected).

    The polygon is projected onto a plane tangent at the outer ring's vertex
    mean (x scaled by cos(lat)); zero-area polygons fall back to the vertex
    mean and are flagged degenerate.
    """
    lat0, lon0 = _vertex_mean(ward.outer_ring)
    scale = math.cos(math.radians(lat0))
    rings = [[((lon - lon0) * scale, lat - lat0) for lat, lon in ring] for ring in ward.polygon]
    projected = Polygon(rings[0], rings[1:])
    if projected.is_empty or projected.area <= 0.0:
        logger.warning("degenerate_polygon", ward_code=ward.ward_code)
        return Centroid(lat0, lon0, degenerate=True)
    centre = projected.centroid
    return Centroid(lat=lat0 + centre.y, lon=lon0 + centre.x / scale)


def great_circle_km(a: LatLon, b: LatLon) -> float:
    """Great-circle distance between two (lat, lon) points in km."""
    return great_circle(a, b).km


def ward_centroid_distance(ward: Ward, centre: LatLon) -> float:
    """Distance from the ward's area centroid to the city centre, in km."""
    centroid = ward_centroid(ward)
    return great_circle_km((centroid.lat, centroid.lon), centre)
