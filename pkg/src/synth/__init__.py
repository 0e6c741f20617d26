"""Synthetic cities with planted effects, and brute-force oracles."""

from .generator import SynthBundle, SynthConfig, generate_city, load_ledger, write_bundle
from .oracles import oracle_assign, oracle_label_counts, oracle_ward_metrics, point_in_ring

__all__ = [
    "SynthBundle",
    "SynthConfig",
    "generate_city",
    "load_ledger",
    "oracle_assign",
    "oracle_label_counts",
    "oracle_ward_metrics",
    "point_in_ring",
    "write_bundle",
]
