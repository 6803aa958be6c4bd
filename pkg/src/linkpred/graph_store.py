"""Day-stamped edge events and immutable graph snapshots.

The raw data is a list of undirected edge events ``(u, v, day)`` where the
day counts from 1990-01-01.  Repeated events between the same pair are kept
(the graph is a multigraph); snapshots expose both the distinct-neighbor
adjacency and per-edge event multiplicities.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np

EPOCH = datetime.date(1990, 1, 1)


class ParseError(ValueError):
    """Malformed line in an input text file; message carries the line number."""


@dataclass
class IngestSummary:
    num_nodes: int
    num_events: int
    rejected_self_loops: int
    events_per_year: dict[int, int]

    def format(self) -> str:
        lines = [
            f"nodes: {self.num_nodes}",
            f"events: {self.num_events}",
            f"rejected_self_loops: {self.rejected_self_loops}",
        ]
        for year in sorted(self.events_per_year):
            lines.append(f"events_{year}: {self.events_per_year[year]}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TemporalGraph:
    """Full multigraph as day-stamped events; immutable after construction."""

    num_nodes: int
    events: np.ndarray  # (n_events, 3) int64 rows (u, v, day)

    def __post_init__(self):
        ev = np.ascontiguousarray(np.asarray(self.events, dtype=np.int64).reshape(-1, 3))
        if ev.size:
            if ev[:, :2].min() < 0 or ev[:, :2].max() >= self.num_nodes:
                raise ValueError("event endpoint out of range")
            if (ev[:, 0] == ev[:, 1]).any():
                raise ValueError("self-loop event")
            if ev[:, 2].min() < 0:
                raise ValueError("negative event day")
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)

    @property
    def num_events(self) -> int:
        return self.events.shape[0]

    @property
    def max_day(self) -> int:
        return int(self.events[:, 2].max()) if self.num_events else 0


@dataclass(frozen=True)
class GraphSnapshot:
    """Simple-graph view of a TemporalGraph at a cutoff day.

    Adjacency is CSR-like: ``indices[indptr[u]:indptr[u+1]]`` is the sorted
    list of distinct neighbors of ``u`` and ``multiplicity`` (aligned with
    ``indices``) counts how many events back each edge.
    """

    num_nodes: int
    cutoff_day: int
    num_events: int
    indptr: np.ndarray
    indices: np.ndarray
    multiplicity: np.ndarray
    _edge_keys: np.ndarray = field(repr=False)  # sorted u*num_nodes+v for u < v

    def _check_node(self, u: int):
        if not 0 <= u < self.num_nodes:
            raise ValueError(f"node id {u} out of range [0, {self.num_nodes})")

    def neighbors(self, u: int) -> np.ndarray:
        self._check_node(u)
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        self._check_node(u)
        return int(self.indptr[u + 1] - self.indptr[u])

    def weighted_degree(self, u: int) -> int:
        self._check_node(u)
        return int(self.multiplicity[self.indptr[u]:self.indptr[u + 1]].sum())

    def has_edge(self, u: int, v: int) -> bool:
        self._check_node(u)
        self._check_node(v)
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def has_edges(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized membership test for canonical pairs."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        keys = np.minimum(us, vs) * self.num_nodes + np.maximum(us, vs)
        pos = np.searchsorted(self._edge_keys, keys)
        pos = np.minimum(pos, max(len(self._edge_keys) - 1, 0))
        if len(self._edge_keys) == 0:
            return np.zeros(len(keys), dtype=bool)
        return self._edge_keys[pos] == keys

    def common_neighbors(self, u: int, v: int) -> np.ndarray:
        return np.intersect1d(self.neighbors(u), self.neighbors(v), assume_unique=True)

    @property
    def num_edges(self) -> int:
        """Number of distinct undirected edges."""
        return len(self._edge_keys)

    def edge_list(self) -> np.ndarray:
        """Distinct edges as an (m, 2) array with u < v, sorted."""
        return np.column_stack((self._edge_keys // self.num_nodes,
                                self._edge_keys % self.num_nodes))


def ingest_edge_list(path) -> TemporalGraph:
    graph, _ = ingest_edge_list_with_summary(path)
    return graph


def ingest_edge_list_with_summary(path) -> tuple[TemporalGraph, IngestSummary]:
    """Parse an edge-list text file.

    Format: optional first line ``#nodes N``, then one event per line
    ``u<TAB>v<TAB>day``.  Self-loop events are rejected (counted in the
    summary); any other malformed content raises ParseError with the line
    number.
    """
    declared_nodes = None
    rows = []
    rejected = 0
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if lineno == 1 and line.startswith("#nodes"):
                parts = line.split()
                if len(parts) != 2:
                    raise ParseError(f"{path}:{lineno}: malformed #nodes header")
                try:
                    declared_nodes = int(parts[1])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: malformed #nodes header") from None
                if declared_nodes < 0:
                    raise ParseError(f"{path}:{lineno}: negative node count")
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'u<TAB>v<TAB>day', got {line!r}")
            try:
                u, v, day = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if day < 0:
                raise ParseError(f"{path}:{lineno}: negative day {day}")
            if u < 0 or v < 0:
                raise ParseError(f"{path}:{lineno}: negative node id")
            if u == v:
                rejected += 1
                continue
            rows.append((u, v, day))

    events = np.array(rows, dtype=np.int64).reshape(-1, 3)
    max_id = int(events[:, :2].max()) if len(rows) else -1
    if declared_nodes is not None:
        if max_id >= declared_nodes:
            raise ParseError(f"{path}: node id {max_id} exceeds declared #nodes {declared_nodes}")
        num_nodes = declared_nodes
    else:
        num_nodes = max_id + 1
    graph = TemporalGraph(num_nodes=num_nodes, events=events)
    summary = IngestSummary(
        num_nodes=num_nodes,
        num_events=graph.num_events,
        rejected_self_loops=rejected,
        events_per_year=_events_per_year(events),
    )
    return graph, summary


def write_edge_list(graph: TemporalGraph, path):
    """Write back to the ingest text format (with a #nodes header)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"#nodes {graph.num_nodes}\n")
        for u, v, day in graph.events:
            fh.write(f"{u}\t{v}\t{day}\n")


_CACHE_MAGIC = b"TGEVCACH"


def save_event_cache(graph: TemporalGraph, path):
    """Binary event cache: magic, version, node count, event count, raw rows."""
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(np.uint16(1).tobytes())
        fh.write(np.uint64(graph.num_nodes).tobytes())
        fh.write(np.uint64(graph.num_events).tobytes())
        fh.write(graph.events.astype("<i8").tobytes())


def load_event_cache(path) -> TemporalGraph:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _CACHE_MAGIC:
        raise ParseError(f"{path}: not an event cache (bad magic)")
    version = int(np.frombuffer(blob[8:10], dtype="<u2")[0])
    if version != 1:
        raise ParseError(f"{path}: unsupported cache version {version}")
    num_nodes = int(np.frombuffer(blob[10:18], dtype="<u8")[0])
    num_events = int(np.frombuffer(blob[18:26], dtype="<u8")[0])
    data = np.frombuffer(blob[26:], dtype="<i8")
    if data.size != num_events * 3:
        raise ParseError(f"{path}: truncated event cache")
    return TemporalGraph(num_nodes=num_nodes, events=data.reshape(-1, 3).astype(np.int64))


def load_graph(path) -> TemporalGraph:
    """Load either a binary event cache or an edge-list text file."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == _CACHE_MAGIC:
        return load_event_cache(path)
    return ingest_edge_list(path)


def snapshot(graph: TemporalGraph, cutoff_day: int) -> GraphSnapshot:
    """Snapshot containing exactly the events with day <= cutoff_day."""
    if cutoff_day < 0:
        raise ValueError("cutoff_day must be >= 0")
    n = graph.num_nodes
    mask = graph.events[:, 2] <= cutoff_day
    uv = graph.events[mask, :2]
    num_events = int(mask.sum())

    # Canonical keys for distinct-edge bookkeeping (u < v).
    lo = np.minimum(uv[:, 0], uv[:, 1]).astype(np.int64)
    hi = np.maximum(uv[:, 0], uv[:, 1]).astype(np.int64)
    canon_keys, canon_counts = np.unique(lo * n + hi, return_counts=True)

    # Symmetric CSR over both arc directions.
    src = np.concatenate([uv[:, 0], uv[:, 1]])
    dst = np.concatenate([uv[:, 1], uv[:, 0]])
    arc_keys, arc_counts = np.unique(src.astype(np.int64) * n + dst, return_counts=True)
    arc_src = arc_keys // n
    arc_dst = arc_keys % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, arc_src + 1, 1)
    indptr = np.cumsum(indptr)

    for arr in (indptr, arc_dst, arc_counts, canon_keys):
        arr.setflags(write=False)
    return GraphSnapshot(
        num_nodes=n,
        cutoff_day=int(cutoff_day),
        num_events=num_events,
        indptr=indptr,
        indices=arc_dst,
        multiplicity=arc_counts,
        _edge_keys=canon_keys,
    )


def year_cutoff_day(year: int) -> int:
    """Day index of December 31 of `year` (day 0 = 1990-01-01)."""
    if year < 1990:
        raise ValueError(f"year {year} precedes the 1990 day epoch")
    return (datetime.date(year, 12, 31) - EPOCH).days


def day_year(day: int) -> int:
    """Calendar year that a day index falls in."""
    if day < 0:
        raise ValueError("day must be >= 0")
    return (EPOCH + datetime.timedelta(days=int(day))).year


def _events_per_year(events: np.ndarray) -> dict[int, int]:
    if len(events) == 0:
        return {}
    days = events[:, 2]
    last_year = day_year(int(days.max()))
    bounds = np.array([year_cutoff_day(y) for y in range(1990, last_year + 1)])
    idx = np.searchsorted(bounds, days)  # events on a Dec 31 belong to that year
    counts = np.bincount(idx, minlength=len(bounds))
    return {1990 + i: int(c) for i, c in enumerate(counts) if c}
