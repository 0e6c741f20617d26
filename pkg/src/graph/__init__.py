"""Yearly transition graphs."""

from .snapshot import (
    SnapshotGraph,
    build_snapshot,
    clustering_vector,
    dump_edges,
    graph_from_edges,
    local_clustering,
    mean_degree,
    node_degrees,
    summarize,
    summary_to_dict,
)

__all__ = [
    "SnapshotGraph",
    "build_snapshot",
    "clustering_vector",
    "dump_edges",
    "graph_from_edges",
    "local_clustering",
    "mean_degree",
    "node_degrees",
    "summarize",
    "summary_to_dict",
]
