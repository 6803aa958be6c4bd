"""Enclosing-subgraph extraction and double-radius node labeling.

For a candidate pair (x, y) the h-hop enclosing subgraph is induced by every
node within h hops of either target.  Non-target nodes may be dropped at
random (memory control); each surviving node gets an integer label encoding
its distances to the two targets, and the subgraph is turned into the one-hot
feature matrix and normalized adjacency the classifier consumes.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph_store import GraphSnapshot

DEFAULT_L_MAX = 10


@dataclass(frozen=True)
class EnclosingSubgraph:
    """Local graph for a candidate pair; nodes[0] and nodes[1] are the targets."""

    nodes: np.ndarray        # original node ids, targets first
    edges: np.ndarray        # (m, 2) local index pairs, i < j
    drnl_labels: np.ndarray  # per-node label, clamped to the configured cap
    h: int

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class SubgraphTensors:
    feature_matrix: np.ndarray   # (n, l_max + 1) one-hot rows
    norm_adjacency: np.ndarray   # (n, n) symmetric, D^-1/2 (A+I) D^-1/2


def drnl_label(dx, dy) -> int:
    """Structural label from the node's hop distances to the two targets.

    1 + min(dx, dy) + (d//2) * ((d//2) + d%2 - 1) with d = dx + dy.
    Unreachable on either side (math.inf or None) maps to label 0.
    """
    if dx is None or dy is None or math.isinf(dx) or math.isinf(dy):
        return 0
    dx, dy = int(dx), int(dy)
    if dx < 0 or dy < 0:
        raise ValueError("distances must be non-negative")
    d = dx + dy
    q, r = divmod(d, 2)
    return 1 + min(dx, dy) + q * (q + r - 1)


def _local_adjacency(n: int, edges: np.ndarray) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    return adj


def _bfs_distances(adj: list[list[int]], source: int, blocked: int) -> np.ndarray:
    """Hop distances from source with one node removed; unreachable = inf."""
    dist = np.full(len(adj), np.inf)
    if source == blocked:
        return dist
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w != blocked and np.isinf(dist[w]):
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def compute_drnl_labels(subgraph: EnclosingSubgraph,
                        l_max: int = DEFAULT_L_MAX) -> np.ndarray:
    """DRNL labels inside the subgraph, with the usual target masking.

    d(i, x) is computed with y removed and d(i, y) with x removed, so a label
    reflects pure double-radius topology.  Targets are labeled 1; overflow
    beyond l_max is clamped to l_max; unreachable nodes get 0.
    """
    n = subgraph.num_nodes
    adj = _local_adjacency(n, subgraph.edges)
    dist_x = _bfs_distances(adj, 0, blocked=1)
    dist_y = _bfs_distances(adj, 1, blocked=0)
    labels = np.zeros(n, dtype=np.int64)
    labels[0] = labels[1] = 1
    for i in range(2, n):
        labels[i] = min(drnl_label(dist_x[i], dist_y[i]), l_max)
    return labels


def _hop_neighborhood(snapshot: GraphSnapshot, source: int, h: int) -> np.ndarray:
    """Nodes within h hops of source (source included)."""
    visited = {source}
    frontier = [source]
    for _ in range(h):
        nxt = []
        for u in frontier:
            for w in snapshot.neighbors(u).tolist():
                if w not in visited:
                    visited.add(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    return np.fromiter(visited, dtype=np.int64, count=len(visited))


def extract_enclosing_subgraph(snapshot: GraphSnapshot, x: int, y: int,
                               h: int = 1, keep_fraction: float = 1.0,
                               seed: int = 0,
                               l_max: int = DEFAULT_L_MAX) -> EnclosingSubgraph:
    """h-hop enclosing subgraph for the non-linked pair (x, y).

    Of the m eligible non-target nodes, ceil(keep_fraction * m) are kept,
    chosen uniformly with the given seed; the targets are never dropped.
    Edges are induced among kept nodes only.
    """
    if x == y:
        raise ValueError("target nodes must differ")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    if h < 1:
        raise ValueError("h must be >= 1")
    if snapshot.has_edge(x, y):
        raise ValueError(f"pair ({x}, {y}) already linked in the snapshot")

    reach = np.union1d(_hop_neighborhood(snapshot, x, h),
                       _hop_neighborhood(snapshot, y, h))
    eligible = reach[(reach != x) & (reach != y)]
    n_keep = math.ceil(keep_fraction * len(eligible))
    if n_keep < len(eligible):
        rng = np.random.default_rng(seed)
        kept = rng.choice(eligible, size=n_keep, replace=False)
        kept = np.sort(kept)
    else:
        kept = eligible

    nodes = np.concatenate(([x, y], kept)).astype(np.int64)
    local = {int(orig): i for i, orig in enumerate(nodes)}
    edge_rows = []
    for i, orig in enumerate(nodes):
        for w in snapshot.neighbors(int(orig)).tolist():
            j = local.get(w)
            if j is not None and i < j:
                edge_rows.append((i, j))
    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2)

    sub = EnclosingSubgraph(nodes=nodes, edges=edges,
                            drnl_labels=np.zeros(len(nodes), dtype=np.int64), h=h)
    labels = compute_drnl_labels(sub, l_max=l_max)
    return EnclosingSubgraph(nodes=nodes, edges=edges, drnl_labels=labels, h=h)


def build_tensors(subgraph: EnclosingSubgraph,
                  l_max: int = DEFAULT_L_MAX) -> SubgraphTensors:
    """One-hot feature rows indexed by label, and the normalized adjacency."""
    labels = subgraph.drnl_labels
    if labels.max(initial=0) > l_max:
        raise ValueError(f"label {labels.max()} exceeds l_max={l_max}")
    n = subgraph.num_nodes
    features = np.zeros((n, l_max + 1), dtype=np.float64)
    features[np.arange(n), labels] = 1.0

    a_tilde = np.eye(n, dtype=np.float64)
    for i, j in subgraph.edges:
        a_tilde[i, j] = a_tilde[j, i] = 1.0
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    norm_adjacency = a_tilde * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]
    return SubgraphTensors(feature_matrix=features, norm_adjacency=norm_adjacency)


def subgraph_to_text(subgraph: EnclosingSubgraph) -> str:
    """Debug text form: hop count, node list, labels, edge lines."""
    lines = [f"h {subgraph.h}",
             "nodes " + " ".join(str(int(v)) for v in subgraph.nodes),
             "labels " + " ".join(str(int(v)) for v in subgraph.drnl_labels)]
    for i, j in subgraph.edges:
        lines.append(f"edge {i} {j}")
    return "\n".join(lines) + "\n"


def subgraph_from_text(text: str) -> EnclosingSubgraph:
    h = None
    nodes = labels = None
    edges = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tag, rest = line.split(" ", 1)
        if tag == "h":
            h = int(rest)
        elif tag == "nodes":
            nodes = np.array([int(v) for v in rest.split()], dtype=np.int64)
        elif tag == "labels":
            labels = np.array([int(v) for v in rest.split()], dtype=np.int64)
        elif tag == "edge":
            i, j = rest.split()
            edges.append((int(i), int(j)))
        else:
            raise ValueError(f"unknown subgraph line {line!r}")
    if h is None or nodes is None or labels is None:
        raise ValueError("incomplete subgraph text")
    return EnclosingSubgraph(nodes=nodes, edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
                             drnl_labels=labels, h=h)
