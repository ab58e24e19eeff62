"""Immutable CSR representation of an undirected simple graph.

Edges are always stored symmetrized and deduplicated, with neighbor lists
sorted inside each row. Self-loops are a uniform all-or-nothing policy:
either every node carries exactly one, or none does. Degree queries and
neighbor views follow the stored policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GraphError(ValueError):
    """Input violates a structural precondition (bad endpoint, bad index)."""


class SparseGraph:
    """Undirected simple graph in CSR form, immutable after construction.

    Attributes:
        n_nodes: number of nodes (indices are dense 0..n_nodes-1).
        row_offsets: int64 array of length n_nodes+1.
        col_indices: int64 array; sorted, duplicate-free within each row.
        has_self_loops: True iff every row contains its own index.
        degrees: row lengths under the stored self-loop policy.
        edge_rows: source node of each stored (directed) entry; aligned
            with col_indices. Cached here because every sparse kernel
            downstream needs it.
    """

    __slots__ = (
        "n_nodes",
        "row_offsets",
        "col_indices",
        "has_self_loops",
        "degrees",
        "edge_rows",
        "nonempty_rows",
        "nonempty_starts",
    )

    def __init__(self, n_nodes: int, row_offsets: np.ndarray,
                 col_indices: np.ndarray, has_self_loops: bool):
        self.n_nodes = int(n_nodes)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        self.has_self_loops = bool(has_self_loops)
        self.degrees = np.diff(self.row_offsets)
        self.edge_rows = np.repeat(np.arange(self.n_nodes, dtype=np.int64),
                                   self.degrees)
        self.nonempty_rows = self.degrees > 0
        self.nonempty_starts = self.row_offsets[:-1][self.nonempty_rows]
        for arr in (self.row_offsets, self.col_indices, self.degrees,
                    self.edge_rows, self.nonempty_rows, self.nonempty_starts):
            arr.flags.writeable = False

    @property
    def n_entries(self) -> int:
        """Number of stored (directed) entries, i.e. len(col_indices)."""
        return int(self.col_indices.shape[0])

    @property
    def n_edges(self) -> int:
        """Number of undirected edges, self-loops excluded."""
        loops = self.n_nodes if self.has_self_loops else 0
        return (self.n_entries - loops) // 2

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_nodes:
            raise GraphError(f"node index {i} out of range [0, {self.n_nodes})")
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def undirected_edges(self) -> np.ndarray:
        """Edge list as an (m, 2) array with i < j, self-loops excluded."""
        rows, cols = self.edge_rows, self.col_indices
        upper = rows < cols
        return np.stack([rows[upper], cols[upper]], axis=1)


@dataclass(frozen=True)
class NeighborView:
    """A node together with its (sorted) neighbor indices."""

    node: int
    neighbors: np.ndarray

    def __len__(self) -> int:
        return int(self.neighbors.shape[0])


def build_graph(edge_list, n_nodes: int, add_self_loops: bool = False) -> SparseGraph:
    """Build a SparseGraph from an iterable of (i, j) pairs.

    Input edges may list one or both directions, contain duplicates and
    self-loops; the result is symmetrized, deduplicated and stripped of
    self-loops, which are then re-added uniformly iff `add_self_loops`.
    An empty edge list is accepted (all-isolated graph).
    """
    n_nodes = int(n_nodes)
    if n_nodes < 0:
        raise GraphError("n_nodes must be nonnegative")
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray)
                       else edge_list, dtype=np.int64)
    edges = edges.reshape(-1, 2)
    if edges.size:
        lo, hi = edges.min(), edges.max()
        if lo < 0 or hi >= n_nodes:
            raise GraphError(
                f"edge endpoint out of range: found {lo if lo < 0 else hi}, "
                f"valid range is [0, {n_nodes})")
    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    if add_self_loops:
        diag = np.arange(n_nodes, dtype=np.int64)
        both = np.concatenate([both, np.stack([diag, diag], axis=1)], axis=0)
    # Encode (i, j) as a single key so dedup + row-major sort is one unique().
    keys = np.unique(both[:, 0] * n_nodes + both[:, 1]) if both.size else \
        np.empty(0, dtype=np.int64)
    rows = keys // n_nodes
    cols = keys % n_nodes
    counts = np.bincount(rows, minlength=n_nodes) if keys.size else \
        np.zeros(n_nodes, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return SparseGraph(n_nodes, offsets, cols, add_self_loops)


def degree(g: SparseGraph, i: int) -> int:
    """Row length of node i under the stored self-loop policy."""
    if not 0 <= i < g.n_nodes:
        raise GraphError(f"node index {i} out of range [0, {g.n_nodes})")
    return int(g.degrees[i])


def neighbors(g: SparseGraph, i: int) -> NeighborView:
    return NeighborView(node=i, neighbors=g.row(i))


def set_self_loops(g: SparseGraph, add_self_loops: bool) -> SparseGraph:
    """Same graph under a different self-loop policy."""
    if add_self_loops == g.has_self_loops:
        return g
    return build_graph(g.undirected_edges(), g.n_nodes, add_self_loops)
