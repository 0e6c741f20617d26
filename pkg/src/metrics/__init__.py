"""Ward-level metrics and the metrics panel."""

from .panel import WardMetricsPanel, build_metrics_panel, panel_to_frame, write_panel_csv
from .quotients import cultural_expenditure_advantage, cultural_venue_advantage, location_quotient
from .ward_metrics import growth_rate, ior, venue_creation, ward_acc, ward_centralities

__all__ = [
    "WardMetricsPanel",
    "build_metrics_panel",
    "cultural_expenditure_advantage",
    "cultural_venue_advantage",
    "growth_rate",
    "ior",
    "location_quotient",
    "panel_to_frame",
    "venue_creation",
    "ward_acc",
    "ward_centralities",
    "write_panel_csv",
]
