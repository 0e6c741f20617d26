"""Input parsing, spatial assignment and expenditure alignment."""

from .expenditure import WardExpenditure, align_periods, apportion_expenditure
from .readers import (
    InputBundle,
    load_inputs,
    parse_expenditure,
    parse_imd,
    parse_transitions,
    parse_venues,
    parse_wards,
)
from .spatial import (
    VenueWardIndex,
    assign_venues_to_wards,
    great_circle_km,
    ward_centroid,
    ward_centroid_distance,
)

__all__ = [
    "InputBundle",
    "VenueWardIndex",
    "WardExpenditure",
    "align_periods",
    "apportion_expenditure",
    "assign_venues_to_wards",
    "great_circle_km",
    "load_inputs",
    "parse_expenditure",
    "parse_imd",
    "parse_transitions",
    "parse_venues",
    "parse_wards",
    "ward_centroid",
    "ward_centroid_distance",
]
