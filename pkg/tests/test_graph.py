"""
Tests for yearly snapshot graphs, clustering and summaries.
"""

import json
import unittest
from itertools import permutations
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pandas as pd

from src.core.models import Rejections
from src.graph.snapshot import (
    build_snapshot,
    clustering_vector,
    dump_edges,
    graph_from_edges,
    local_clustering,
    mean_degree,
    node_degrees,
    summarize,
)
from src.ingest.readers import TransitionLog
from src.report.emit import emit_graph_summaries


def _graph(pairs, year=2011):
    return graph_from_edges(year, [o for o, _ in pairs], [d for _, d in pairs])


def _brute_clustering(pairs, node):
    edges = {(o, d) for o, d in pairs if o != d}
    nbrs = {d for o, d in edges if o == node} | {o for o, d in edges if d == node}
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = sum(1 for j, l in permutations(nbrs, 2) if (j, l) in edges)
    return links / (k * (k - 1))


def _log(rows):
    frame = pd.DataFrame(rows, columns=["origin_venue", "dest_venue", "t_origin"])
    frame["t_origin"] = pd.to_datetime(frame["t_origin"], utc=True)
    frame["t_dest"] = frame["t_origin"]
    frame["year"] = frame["t_origin"].dt.year.astype(np.int64)
    return TransitionLog(frame, Rejections(), len(frame))


class TestSnapshot(unittest.TestCase):
    """Test graph construction."""

    def test_counts_repeated_trips(self):
        """Test that repeated trips add up into one weighted edge."""
        graph = _graph([("a", "b"), ("a", "b"), ("b", "c")])
        self.assertEqual(graph.edges, {("a", "b"): 2, ("b", "c"): 1})
        self.assertEqual(list(graph.nodes), ["a", "b", "c"])
        self.assertEqual(graph.total_weight, 3)

    def test_year_is_taken_from_origin_timestamp(self):
        """Test that a transition belongs to the year of its origin timestamp."""
        log = _log([
            ("a", "b", "2011-12-31T23:50:00Z"),
            ("b", "c", "2012-01-01T00:10:00Z"),
            ("c", "a", "2012-06-01T00:00:00Z"),
        ])
        graph = build_snapshot(log, 2012)
        self.assertEqual(graph.edges, {("b", "c"): 1, ("c", "a"): 1})

    def test_empty_year(self):
        """Test that a year without transitions gives an empty graph and a zero summary."""
        graph = build_snapshot(_log([("a", "b", "2011-01-01T00:00:00Z")]), 2013)
        self.assertEqual(len(graph), 0)
        self.assertEqual(graph.edge_count, 0)
        summary = summarize(graph)
        self.assertEqual((summary.nodes, summary.edges, summary.mean_clustering, summary.mean_degree),
                         (0, 0, 0.0, 0.0))

    def test_independent_of_input_order(self):
        """Test that edges do not depend on transition order."""
        pairs = [("a", "b"), ("b", "c"), ("c", "a"), ("a", "b"), ("d", "a")]
        forward, backward = _graph(pairs), _graph(list(reversed(pairs)))
        self.assertEqual(forward.edges, backward.edges)

    def test_duplicate_changes_weight_only(self):
        """Test that a repeated trip raises the weight but not the edge count."""
        pairs = [("a", "b"), ("b", "c")]
        before, after = _graph(pairs), _graph(pairs + [("b", "c")])
        self.assertEqual(before.edge_count, after.edge_count)
        self.assertEqual(after.edges[("b", "c")], 2)

    def test_self_loops_kept_but_not_neighbours(self):
        """Test that self-loops keep their weight but are not neighbours."""
        graph = _graph([("a", "a"), ("a", "a"), ("a", "b")])
        self.assertEqual(graph.edges[("a", "a")], 2)
        self.assertEqual(graph.edge_count, 1)
        self.assertEqual(graph.neighbours("a"), {"b"})

    def test_unknown_node(self):
        """Test that clustering of an unknown node raises KeyError."""
        with self.assertRaises(KeyError):
            local_clustering(_graph([("a", "b")]), "zz")


class TestClustering(unittest.TestCase):
    """Test local clustering and degrees."""

    def test_directed_cycle(self):
        """Test clustering in a directed three-cycle."""
        graph = _graph([("a", "b"), ("b", "c"), ("c", "a")])
        self.assertAlmostEqual(local_clustering(graph, "a"), 0.5)

    def test_bidirectional_triangle(self):
        """Test that a fully bidirectional triangle has clustering one."""
        pairs = [(x, y) for x, y in permutations("abc", 2)]
        self.assertAlmostEqual(local_clustering(_graph(pairs), "a"), 1.0)

    def test_star_centre(self):
        """Test that a star centre has clustering zero."""
        graph = _graph([("hub", "x"), ("hub", "y"), ("z", "hub")])
        self.assertEqual(local_clustering(graph, "hub"), 0.0)

    def test_vector_matches_brute_force(self):
        """Test that vector and per-node clustering match a brute-force count on random graphs."""
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            m = int(rng.integers(1, 40))
            pairs = [(f"v{a}", f"v{b}") for a, b in rng.integers(0, n, (m, 2))]
            graph = _graph(pairs)
            vector = clustering_vector(graph)
            for i, node in enumerate(graph.nodes):
                expected = _brute_clustering(pairs, node)
                self.assertAlmostEqual(vector[i], expected, places=12)
                self.assertAlmostEqual(local_clustering(graph, node), expected, places=12)
                self.assertTrue(0.0 <= vector[i] <= 1.0)

    def test_node_degrees(self):
        """Test in-weight, out-weight and neighbour counts, self-loops included."""
        graph = _graph([("a", "b"), ("a", "b"), ("c", "b")])
        self.assertEqual(node_degrees(graph, "b"), (3, 0, 2))
        loop = _graph([("s", "s"), ("s", "s")])
        self.assertEqual(node_degrees(loop, "s"), (2, 2, 0))
        pair = _graph([("a", "b"), ("b", "a")])
        self.assertEqual(node_degrees(pair, "a"), (1, 1, 1))


class TestSummary(unittest.TestCase):
    """Test network summaries."""

    def test_mean_degree_of_reported_snapshots(self):
        """Test mean degree against two reported yearly snapshots."""
        self.assertAlmostEqual(round(mean_degree(15832, 469229), 1), 59.3)
        self.assertAlmostEqual(round(mean_degree(17684, 742017), 1), 83.9)

    def test_bidirectional_pair(self):
        """Test the summary of a two-node bidirectional graph."""
        summary = summarize(_graph([("a", "b"), ("b", "a")]))
        self.assertEqual((summary.nodes, summary.edges), (2, 2))
        self.assertEqual(summary.mean_degree, 2.0)
        self.assertEqual(summary.mean_clustering, 0.0)

    def test_dumps(self):
        """Test the edge list and graph summary files."""
        graph = _graph([("b", "a"), ("a", "b"), ("a", "b")], year=2012)
        with TemporaryDirectory() as tmp:
            path = dump_edges(graph, Path(tmp) / "edges.csv")
            self.assertEqual(path.read_text(encoding="utf-8"), "origin,dest,weight\na,b,2\nb,a,1\n")
            paths = emit_graph_summaries({2012: graph}, tmp)
            self.assertEqual([p.name for p in paths], ["graph_summary.json", "edges_2012.csv"])
            document = json.loads(paths[0].read_text(encoding="utf-8"))
            self.assertEqual(document["snapshots"][0]["t"], 2012)
            self.assertEqual(document["snapshots"][0]["edges"], 2)
            self.assertIn("spec_version", document)


if __name__ == '__main__':
    unittest.main()
