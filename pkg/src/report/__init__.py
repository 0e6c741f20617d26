"""Report tables and pipeline orchestration."""

from .emit import (
    emit_borough_overview,
    emit_change_distribution,
    emit_graph_summaries,
    emit_group_means,
    emit_scatter_data,
    quadrant,
    write_csv,
    write_json,
)
from .pipeline import STAGES, PipelineRun, run_pipeline

__all__ = [
    "PipelineRun",
    "STAGES",
    "emit_borough_overview",
    "emit_change_distribution",
    "emit_graph_summaries",
    "emit_group_means",
    "emit_scatter_data",
    "quadrant",
    "run_pipeline",
    "write_csv",
    "write_json",
]
