"""Temporal edge lists, per-timeframe snapshots and preprocessing filters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

BALANCE_RULES = ("edges", "time")


@dataclass(frozen=True)
class TemporalEdgeList:
    """Edges as an ``(m, 3)`` int64 array of ``(u, v, t)`` rows, sorted by ``t``."""

    edges: np.ndarray
    directed: bool = False

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "edges", e)

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return (tuple(int(x) for x in row) for row in self.edges)

    @property
    def span(self) -> int:
        """Time covered, ``t_max - t_min`` (0 for an empty list)."""
        if len(self.edges) == 0:
            return 0
        return int(self.edges[-1, 2] - self.edges[0, 2])


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Simple undirected graph of one timeframe.

    ``adjacency`` maps every node to a sorted tuple of neighbours; nodes with
    an empty tuple are isolated but still members of the snapshot.
    """

    index: int
    adjacency: Mapping[int, tuple]
    source_range: tuple = field(default=(0, 0))

    @classmethod
    def from_edges(cls, index, edges, nodes=(), source_range=(0, 0)):
        adj: dict[int, set] = {int(v): set() for v in nodes}
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                continue
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        adjacency = {v: tuple(sorted(adj[v])) for v in sorted(adj)}
        return cls(index=index, adjacency=adjacency, source_range=tuple(source_range))

    @property
    def nodes(self) -> tuple:
        return tuple(self.adjacency)

    @cached_property
    def node_set(self) -> frozenset:
        return frozenset(self.adjacency)

    def __contains__(self, v):
        return v in self.adjacency

    def __len__(self):
        return len(self.adjacency)

    @cached_property
    def n_edges(self) -> int:
        return sum(len(nb) for nb in self.adjacency.values()) // 2

    def degree(self, v) -> int:
        return len(self.adjacency[v])

    def edges(self):
        """Yield each undirected edge once as ``(u, v)`` with ``u < v``."""
        for u, nbrs in self.adjacency.items():
            for v in nbrs:
                if u < v:
                    yield u, v

    @cached_property
    def csr(self):
        """``(node_ids, indptr, indices)`` with neighbours as local positions."""
        node_ids = np.fromiter(self.adjacency, dtype=np.int64, count=len(self.adjacency))
        pos = {v: i for i, v in enumerate(node_ids.tolist())}
        indptr = np.zeros(len(node_ids) + 1, dtype=np.int64)
        flat = []
        for i, v in enumerate(node_ids.tolist()):
            nb = self.adjacency[v]
            indptr[i + 1] = indptr[i] + len(nb)
            flat.extend(pos[u] for u in nb)
        return node_ids, indptr, np.asarray(flat, dtype=np.int64)

    def subgraph(self, nodes: Iterable) -> "Snapshot":
        keep = set(nodes) & self.node_set
        adjacency = {v: tuple(u for u in self.adjacency[v] if u in keep) for v in sorted(keep)}
        return Snapshot(index=self.index, adjacency=adjacency, source_range=self.source_range)

    def validate(self):
        for v, nbrs in self.adjacency.items():
            if len(set(nbrs)) != len(nbrs):
                raise ValidationError(f"snapshot {self.index}: parallel edge at node {v}")
            for u in nbrs:
                if u == v:
                    raise ValidationError(f"snapshot {self.index}: self-loop at node {v}")
                if u not in self.adjacency or v not in self.adjacency[u]:
                    raise ValidationError(f"snapshot {self.index}: asymmetric edge ({v}, {u})")


def parse_edge_list(stream: Iterable[str], directed: bool = False) -> TemporalEdgeList:
    """Parse ``u v [t]`` lines. Missing ``t`` defaults to the 1-based line number.

    Self-loops are dropped. Unless ``directed``, each edge is stored as
    ``(min, max, t)`` and exact duplicates collapse.
    """
    rows = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ParseError(f"expected 2 or 3 fields, got {len(tokens)}", lineno)
        try:
            vals = [int(tok) for tok in tokens]
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        u, v = vals[0], vals[1]
        t = vals[2] if len(vals) == 3 else lineno
        if u < 0 or v < 0:
            raise ValidationError(f"line {lineno}: negative node id in {line!r}")
        if u == v:
            continue
        if not directed and u > v:
            u, v = v, u
        rows.append((u, v, t))

    if not rows:
        return TemporalEdgeList(np.empty((0, 3), dtype=np.int64), directed)
    arr = np.asarray(rows, dtype=np.int64)
    # drop exact duplicates, keeping first occurrences in input order
    _, first = np.unique(arr, axis=0, return_index=True)
    arr = arr[np.sort(first)]
    arr = arr[np.argsort(arr[:, 2], kind="stable")]
    return TemporalEdgeList(arr, directed)


def read_edge_list(path, directed=False) -> TemporalEdgeList:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, directed=directed)


def write_edge_list(tel: TemporalEdgeList, path):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, t in tel.edges.tolist():
            fh.write(f"{u} {v} {t}\n")


def _group_bounds(tel: TemporalEdgeList, T: int, balance: str):
    m = len(tel)
    if balance == "edges":
        base, extra = divmod(m, T)
        sizes = [base + (1 if i < extra else 0) for i in range(T)]
        stops = np.cumsum(sizes)
        return list(zip(np.r_[0, stops[:-1]].tolist(), stops.tolist()))
    if balance == "time":
        t = tel.edges[:, 2]
        t0, t1 = int(t[0]), int(t[-1])
        cuts = t0 + (t1 - t0 + 1) * np.arange(1, T) / T
        inner = np.searchsorted(t, cuts, side="left").tolist()
        starts = [0] + inner
        stops = inner + [m]
        return list(zip(starts, stops))
    raise ConfigError(f"unknown balance rule {balance!r}; expected one of {BALANCE_RULES}")


def split_snapshots(tel: TemporalEdgeList, T: int, balance: str = "edges") -> list[Snapshot]:
    """Cut the time-ordered edges into ``T`` contiguous groups.

    With ``balance="edges"`` group sizes differ by at most one; ``"time"``
    uses equal-duration windows. Duplicate undirected edges inside a group
    collapse to a single edge.
    """
    if T < 1:
        raise ConfigError(f"snapshot count must be >= 1, got {T}")
    if len(tel) == 0:
        raise ConfigError("cannot split an empty edge list")
    if T > len(tel):
        raise ConfigError(f"snapshot count {T} exceeds number of edges {len(tel)}")
    snapshots = []
    for i, (start, stop) in enumerate(_group_bounds(tel, T, balance)):
        group = tel.edges[start:stop, :2]
        snapshots.append(Snapshot.from_edges(i, group.tolist(), source_range=(start, stop)))
    return snapshots


def filter_min_degree(s: Snapshot, dmin: int) -> Snapshot:
    """Induced subgraph on nodes with degree >= ``dmin`` (one pass, no re-filtering)."""
    if dmin < 0:
        raise ConfigError(f"dmin must be >= 0, got {dmin}")
    if dmin == 0:
        return s
    return s.subgraph(v for v, nb in s.adjacency.items() if len(nb) >= dmin)


def snapshot_manifest(snapshots: list[Snapshot]) -> dict:
    return {
        "snapshots": [
            {
                "index": s.index,
                "nodes": len(s),
                "edges": s.n_edges,
                "source_edge_range": list(s.source_range),
            }
            for s in snapshots
        ]
    }


def write_manifest(snapshots, path):
    Path(path).write_text(json.dumps(snapshot_manifest(snapshots), indent=2) + "\n", encoding="utf-8")


def write_snapshot(s: Snapshot, path):
    """Write ``u v`` lines per edge and a bare ``v`` line per isolated node."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# snapshot {s.index} source {s.source_range[0]} {s.source_range[1]}\n")
        for v, nbrs in s.adjacency.items():
            if not nbrs:
                fh.write(f"{v}\n")
        for u, v in s.edges():
            fh.write(f"{u} {v}\n")


def read_snapshot(path) -> Snapshot:
    index, source = 0, (0, 0)
    edges, isolated = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 5 and parts[0] == "snapshot":
                    index, source = int(parts[1]), (int(parts[3]), int(parts[4]))
                continue
            tok = line.split()
            try:
                vals = [int(x) for x in tok]
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", lineno) from None
            if len(vals) == 1:
                isolated.append(vals[0])
            elif len(vals) == 2:
                edges.append(vals)
            else:
                raise ParseError(f"expected 1 or 2 fields, got {len(vals)}", lineno)
    return Snapshot.from_edges(index, edges, nodes=isolated, source_range=source)
