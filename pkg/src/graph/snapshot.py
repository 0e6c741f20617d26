"""
Yearly venue-transition graphs.

A SnapshotGraph stores the weighted directed graph of one calendar year as
a sparse matrix over the sorted venue ids that appear as an endpoint that
year. Self-loops keep their weight but take no part in neighbour sets,
clustering or the edge count used for mean degree.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy import sparse

from ..core.models import GraphSummary
from ..ingest.readers import TransitionLog

logger = structlog.get_logger(__name__)

# rows per block when evaluating clustering for the whole graph
CLUSTERING_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class SnapshotGraph:
    """
    Immutable directed weighted graph for one year.

    Attributes:
        year: Calendar year
        nodes: Sorted venue ids with at least one transition endpoint
        weights: CSR matrix, weights[i, j] = transitions from nodes[i] to nodes[j]
    """
    year: int
    nodes: np.ndarray
    weights: sparse.csr_matrix
    _position: Dict[str, int] = field(init=False, repr=False, compare=False)
    _adjacency: sparse.csr_matrix = field(init=False, repr=False, compare=False)
    _neighbours: sparse.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.weights.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("weight matrix does not match node count")
        if self.weights.nnz and self.weights.data.min() < 1:
            raise ValueError("stored edge weights must be at least 1")
        coo = self.weights.tocoo()
        off_diagonal = coo.row != coo.col
        adjacency = sparse.csr_matrix(
            (np.ones(int(off_diagonal.sum()), dtype=np.int64),
             (coo.row[off_diagonal], coo.col[off_diagonal])),
            shape=self.weights.shape,
        )
        neighbours = ((adjacency + adjacency.T) > 0).astype(np.int64).tocsr()
        object.__setattr__(self, "_position", {node: i for i, node in enumerate(self.nodes)})
        object.__setattr__(self, "_adjacency", adjacency.tocsr())
        object.__setattr__(self, "_neighbours", neighbours)

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node: str) -> bool:
        return node in self._position

    def position(self, node: str) -> int:
        try:
            return self._position[node]
        except KeyError:
            raise KeyError(f"venue {node!r} is not a node of the {self.year} graph") from None

    @property
    def adjacency(self) -> sparse.csr_matrix:
        """Binary adjacency without self-loops."""
        return self._adjacency

    @property
    def neighbour_matrix(self) -> sparse.csr_matrix:
        """Symmetric binary matrix of the undirected neighbour relation."""
        return self._neighbours

    @property
    def edge_count(self) -> int:
        """Distinct directed edges excluding self-loops."""
        return int(self._adjacency.nnz)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    @property
    def in_weights(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=0)).ravel()

    @property
    def out_weights(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @property
    def neighbour_counts(self) -> np.ndarray:
        return np.diff(self._neighbours.indptr)

    @property
    def edges(self) -> Dict[Tuple[str, str], int]:
        """All stored edges, self-loops included, as (origin, dest) -> weight."""
        return dict(self.iter_edges())

    def iter_edges(self) -> Iterator[Tuple[Tuple[str, str], int]]:
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, w in zip(coo.row[order], coo.col[order], coo.data[order]):
            yield (self.nodes[r], self.nodes[c]), int(w)

    def successors(self, node: str) -> set:
        i = self.position(node)
        return {self.nodes[j] for j in self._adjacency[i].indices}

    def predecessors(self, node: str) -> set:
        i = self.position(node)
        return {self.nodes[j] for j in self._adjacency[:, [i]].tocoo().row}

    def neighbours(self, node: str) -> set:
        i = self.position(node)
        return {self.nodes[j] for j in self._neighbours[i].indices}


def graph_from_edges(year: int, origins, dests, counts=None) -> SnapshotGraph:
    """Build a snapshot from parallel arrays of origin and destination ids."""
    origins = np.asarray(origins, dtype=object)
    dests = np.asarray(dests, dtype=object)
    nodes = np.unique(np.concatenate([origins, dests])) if len(origins) else np.array([], dtype=object)
    n = len(nodes)
    rows = np.searchsorted(nodes, origins)
    cols = np.searchsorted(nodes, dests)
    data = np.ones(len(rows), dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    weights = sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    weights.sum_duplicates()
    return SnapshotGraph(year=year, nodes=nodes.astype(object), weights=weights)


def build_snapshot(log: TransitionLog, year: int) -> SnapshotGraph:
    """
    Build the transition graph of one calendar year.

    Transitions belong to the year of their origin timestamp. A year without
    transitions gives an empty graph.
    """
    frame = log.for_year(year)
    graph = graph_from_edges(year, frame["origin_venue"].to_numpy(dtype=object),
                             frame["dest_venue"].to_numpy(dtype=object))
    logger.info("snapshot_built", year=year, nodes=len(graph), edges=graph.edge_count,
                transitions=graph.total_weight)
    return graph


def local_clustering(graph: SnapshotGraph, node: str) -> float:
    """
    Local clustering of one node.

    k is the number of distinct in- or out-neighbours (self excluded) and
    L the number of directed edges among them; C = L / (k(k-1)), 0 for k < 2.

    Raises:
        KeyError: If the node is not in the graph
    """
    i = graph.position(node)
    neighbours = graph.neighbour_matrix[i].indices
    k = len(neighbours)
    if k < 2:
        return 0.0
    links = graph.adjacency[neighbours][:, neighbours].nnz
    return links / (k * (k - 1))


def clustering_vector(graph: SnapshotGraph) -> np.ndarray:
    """Local clustering of every node, in node order."""
    n = len(graph)
    result = np.zeros(n, dtype=float)
    if n == 0:
        return result
    adjacency = graph.adjacency
    neighbours = graph.neighbour_matrix
    k = graph.neighbour_counts.astype(float)
    for start in range(0, n, CLUSTERING_BLOCK):
        block = neighbours[start:start + CLUSTERING_BLOCK]
        # L_i = sum_j sum_l S_ij A_jl S_il
        links = np.asarray((block @ adjacency).multiply(block).sum(axis=1)).ravel()
        kb = k[start:start + CLUSTERING_BLOCK]
        denominator = kb * (kb - 1)
        result[start:start + CLUSTERING_BLOCK] = np.divide(
            links, denominator, out=np.zeros_like(links, dtype=float), where=kb >= 2
        )
    return result


def node_degrees(graph: SnapshotGraph, node: str) -> Tuple[int, int, int]:
    """(in_weight, out_weight, neighbour_count) of a node; self-loops count in both weights."""
    i = graph.position(node)
    in_weight = int(graph.weights[:, [i]].sum())
    out_weight = int(graph.weights[i].sum())
    return in_weight, out_weight, int(graph.neighbour_counts[i])


def mean_degree(nodes: int, edges: int) -> float:
    """<k> = 2|E| / |V|, zero for an empty graph."""
    return 2.0 * edges / nodes if nodes else 0.0


def summarize(graph: SnapshotGraph) -> GraphSummary:
    """Node and edge counts, mean clustering and mean degree of a snapshot."""
    n = len(graph)
    clustering = clustering_vector(graph)
    return GraphSummary(
        year=graph.year,
        nodes=n,
        edges=graph.edge_count,
        mean_clustering=float(clustering.mean()) if n else 0.0,
        mean_degree=mean_degree(n, graph.edge_count),
    )


def summary_to_dict(summary: GraphSummary) -> Dict:
    return summary.to_dict()


def edges_frame(graph: SnapshotGraph) -> pd.DataFrame:
    coo = graph.weights.tocoo()
    frame = pd.DataFrame({
        "origin": graph.nodes[coo.row] if coo.nnz else np.array([], dtype=object),
        "dest": graph.nodes[coo.col] if coo.nnz else np.array([], dtype=object),
        "weight": coo.data.astype(np.int64),
    })
    return frame.sort_values(["origin", "dest"], kind="mergesort").reset_index(drop=True)


def dump_edges(graph: SnapshotGraph, path) -> Path:
    """Write the edge list as CSV with columns origin,dest,weight."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    edges_frame(graph).to_csv(path, index=False, lineterminator="\n")
    logger.debug("edges_dumped", year=graph.year, path=str(path))
    return path
