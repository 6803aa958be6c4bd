"""Synthetic temporal benchmark with planted, learnable link formation.

The input-year graph is a random graph over the non-isolated nodes, where a
chosen fraction of nodes get extra edges planted among their neighbors so
their local clustering coefficient rises by roughly `cc_boost`.  Future
links follow three rules, all evaluated on the final input-year graph:

  * connected-connected pairs close triangles: link probability is
    `p_triadic` when they share at least `cn_threshold` common neighbors,
    `p_background` otherwise;
  * an isolated node is absorbed by a connected node with probability
    `p_absorb` when the connected node's clustering coefficient reaches
    `cc_threshold`, `p_absorb_background` otherwise;
  * isolated-isolated pairs link at a small background rate.

Both planted rules are visible inside a 1-hop enclosing subgraph, so
subgraph classifiers can learn them.  Only the triangle rule is expressible
with degree and common-neighbor counts; the absorption rule keys on a
quantity that is nearly independent of degree, so pure degree features
carry almost no information about it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_store import TemporalGraph, year_cutoff_day


@dataclass(frozen=True)
class SyntheticConfig:
    num_nodes: int = 500
    num_isolated: int = 80
    mean_degree: float = 8.0
    clustered_fraction: float = 0.4
    cc_boost: float = 0.25
    cn_threshold: int = 2
    p_triadic: float = 0.8
    p_background: float = 0.05
    cc_threshold: float = 0.12
    p_absorb: float = 0.8
    p_absorb_background: float = 0.03
    p_isolated_pair: float = 0.02
    input_year: int = 2005
    target_year: int = 2008
    history_years: int = 10  # initial edges are spread over this many years
    seed: int = 0


@dataclass(frozen=True)
class SyntheticBenchmark:
    graph: TemporalGraph
    config: SyntheticConfig
    isolated: np.ndarray       # node ids with no initial edges
    input_cutoff: int
    target_cutoff: int


def clustering_coefficients(adj: np.ndarray) -> np.ndarray:
    """Local clustering coefficient per node of a boolean adjacency matrix."""
    n = adj.shape[0]
    cc = np.zeros(n)
    deg = adj.sum(axis=1)
    for w in range(n):
        if deg[w] < 2:
            continue
        nbrs = np.flatnonzero(adj[w])
        ego_edges = adj[np.ix_(nbrs, nbrs)].sum() // 2
        cc[w] = ego_edges / (deg[w] * (deg[w] - 1) / 2)
    return cc


def make_synthetic_benchmark(config: SyntheticConfig = SyntheticConfig()) -> SyntheticBenchmark:
    rng = np.random.default_rng(config.seed)
    n = config.num_nodes
    isolated = np.sort(rng.choice(n, size=config.num_isolated, replace=False))
    connected = np.setdiff1d(np.arange(n), isolated)

    adj = np.zeros((n, n), dtype=bool)
    iu, iv = np.triu_indices(len(connected), k=1)
    p_edge = config.mean_degree / max(len(connected) - 1, 1)
    hit = rng.random(len(iu)) < p_edge
    for a, b in zip(connected[iu[hit]], connected[iv[hit]]):
        adj[a, b] = adj[b, a] = True

    # Raise the clustering coefficient of a random subset of connected nodes
    # by planting edges among their (base-graph) neighbors.
    base = adj.copy()
    n_clustered = int(round(config.clustered_fraction * len(connected)))
    clustered = rng.choice(connected, size=n_clustered, replace=False)
    for w in clustered:
        nbrs = np.flatnonzero(base[w])
        if len(nbrs) < 2:
            continue
        pairs = [(a, b) for i, a in enumerate(nbrs) for b in nbrs[i + 1:] if not adj[a, b]]
        if not pairs:
            continue
        want = int(round(config.cc_boost * len(nbrs) * (len(nbrs) - 1) / 2))
        take = min(want, len(pairs))
        if take == 0:
            continue
        for k in rng.choice(len(pairs), size=take, replace=False):
            a, b = pairs[k]
            adj[a, b] = adj[b, a] = True

    start_day = year_cutoff_day(config.input_year - config.history_years) + 1
    input_cutoff = year_cutoff_day(config.input_year)
    target_cutoff = year_cutoff_day(config.target_year)

    eu, ev = np.nonzero(np.triu(adj, k=1))
    days = rng.integers(start_day, input_cutoff + 1, size=len(eu))
    events = [np.column_stack((eu, ev, days))]

    # Plant future links on the non-edges of the input graph.
    deg = adj.sum(axis=1)
    cn = adj.astype(np.int64) @ adj.astype(np.int64)
    dense = (deg >= 2) & (clustering_coefficients(adj) >= config.cc_threshold)

    cu, cv = np.triu_indices(n, k=1)
    free = ~adj[cu, cv]
    cu, cv = cu[free], cv[free]
    deg_u, deg_v = deg[cu], deg[cv]
    both = (deg_u > 0) & (deg_v > 0)
    neither = (deg_u == 0) & (deg_v == 0)
    one = ~both & ~neither

    p = np.full(len(cu), config.p_background)
    p[both & (cn[cu, cv] >= config.cn_threshold)] = config.p_triadic
    anchor_dense = np.where(deg_u > 0, dense[cu], dense[cv])
    p[one] = np.where(anchor_dense[one], config.p_absorb, config.p_absorb_background)
    p[neither] = config.p_isolated_pair

    linked = rng.random(len(cu)) < p
    fu, fv = cu[linked], cv[linked]
    fdays = rng.integers(input_cutoff + 1, target_cutoff + 1, size=len(fu))
    events.append(np.column_stack((fu, fv, fdays)))

    graph = TemporalGraph(num_nodes=n, events=np.vstack(events))
    return SyntheticBenchmark(graph=graph, config=config, isolated=isolated,
                              input_cutoff=input_cutoff, target_cutoff=target_cutoff)
