"""Partitions of snapshots: Louvain detection and modularity."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .graph import Snapshot

_GAIN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Clustering:
    """Hard partition of one snapshot; cluster ids are ``0..m-1``."""

    snapshot_index: int
    assignment: Mapping[int, int]

    @classmethod
    def from_labels(cls, snapshot_index, nodes, labels):
        """Build from arbitrary labels, renumbering clusters by first appearance
        over the sorted node ids."""
        pairs = sorted(zip((int(v) for v in nodes), labels))
        remap: dict = {}
        assignment = {}
        for v, lab in pairs:
            assignment[v] = remap.setdefault(lab, len(remap))
        return cls(snapshot_index, assignment)

    @cached_property
    def m(self) -> int:
        return len(set(self.assignment.values()))

    @cached_property
    def members(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.m)]
        for v in sorted(self.assignment):
            out[self.assignment[v]].append(v)
        return out

    def __getitem__(self, v) -> int:
        return self.assignment[v]

    def __contains__(self, v):
        return v in self.assignment

    def __len__(self):
        return len(self.assignment)

    def validate(self, snapshot: Snapshot | None = None):
        ids = set(self.assignment.values())
        if ids != set(range(len(ids))):
            raise ValidationError(f"cluster ids of snapshot {self.snapshot_index} are not 0..m-1: {sorted(ids)}")
        if snapshot is not None and set(self.assignment) != snapshot.node_set:
            raise ValidationError(f"clustering does not cover exactly the nodes of snapshot {snapshot.index}")


def modularity(s: Snapshot, c: Clustering) -> float:
    """Newman modularity at resolution 1."""
    m_e = s.n_edges
    if m_e == 0:
        raise DataError(f"modularity is undefined for edgeless snapshot {s.index}")
    intra = np.zeros(c.m)
    deg = np.zeros(c.m)
    for u, nbrs in s.adjacency.items():
        cu = c[u]
        deg[cu] += len(nbrs)
        for v in nbrs:
            if u < v and c[v] == cu:
                intra[cu] += 1
    return float(np.sum(intra / m_e - (deg / (2.0 * m_e)) ** 2))


def _local_moves(nbrs, loops, order):
    """One Louvain level on a weighted graph given as per-node neighbour dicts.

    Returns the community of every node (not renumbered) and whether any node moved.
    """
    n = len(nbrs)
    k = np.array([sum(nb.values()) + 2.0 * loops[i] for i, nb in enumerate(nbrs)])
    m2 = k.sum()
    com = list(range(n))
    tot = k.copy()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ki = k[i]
            if ki == 0.0:
                continue
            ci = com[i]
            wc: dict[int, float] = {}
            for j, w in nbrs[i].items():
                cj = com[j]
                wc[cj] = wc.get(cj, 0.0) + w
            tot[ci] -= ki
            best, best_gain = ci, wc.get(ci, 0.0) - tot[ci] * ki / m2
            for c, w in wc.items():
                if c == ci:
                    continue
                gain = w - tot[c] * ki / m2
                if gain > best_gain + _GAIN_EPS:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != ci:
                com[i] = best
                improved = moved_any = True
    return com, moved_any


def _aggregate(nbrs, loops, com):
    labels = {}
    for c in com:
        labels.setdefault(c, len(labels))
    new = [labels[c] for c in com]
    n2 = len(labels)
    agg: list[dict[int, float]] = [{} for _ in range(n2)]
    new_loops = [0.0] * n2
    for i, nb in enumerate(nbrs):
        ci = new[i]
        new_loops[ci] += loops[i]
        for j, w in nb.items():
            cj = new[j]
            if cj == ci:
                new_loops[ci] += w / 2.0
            else:
                agg[ci][cj] = agg[ci].get(cj, 0.0) + w
    return agg, new_loops, new


def louvain_levels(s: Snapshot, seed: int = 0) -> list[Clustering]:
    """All partitions produced by successive Louvain levels, finest first."""
    nodes = list(s.nodes)
    pos = {v: i for i, v in enumerate(nodes)}
    nbrs = [{pos[u]: 1.0 for u in s.adjacency[v]} for v in nodes]
    loops = [0.0] * len(nodes)
    membership = list(range(len(nodes)))
    rng = np.random.default_rng(seed)
    levels = []
    while True:
        order = rng.permutation(len(nbrs)).tolist()
        com, moved = _local_moves(nbrs, loops, order)
        if not moved:
            break
        nbrs, loops, new = _aggregate(nbrs, loops, com)
        membership = [new[c] for c in membership]
        levels.append(Clustering.from_labels(s.index, nodes, membership))
    if not levels:
        levels.append(Clustering.from_labels(s.index, nodes, membership))
    return levels


def louvain(s: Snapshot, seed: int = 0) -> Clustering:
    """Louvain partition at resolution 1 with a seeded node visiting order."""
    return louvain_levels(s, seed)[-1]


def write_clustering(c: Clustering, path, q: float | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        header = f"# snapshot {c.snapshot_index}"
        if q is not None:
            header += f" Q {q!r}"
        fh.write(header + "\n")
        for v in sorted(c.assignment):
            fh.write(f"{v} {c.assignment[v]}\n")


def read_clustering(path) -> Clustering:
    index = 0
    assignment = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) >= 2 and parts[0] == "snapshot":
                    index = int(parts[1])
                continue
            tok = line.split()
            if len(tok) != 2:
                raise ParseError("expected 'node_id cluster_id'", lineno)
            try:
                assignment[int(tok[0])] = int(tok[1])
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", lineno) from None
    c = Clustering(index, assignment)
    c.validate()
    return c


def read_clustering_q(path) -> float | None:
    with open(path, encoding="utf-8") as fh:
        parts = fh.readline()[1:].split()
    if "Q" in parts:
        return float(parts[parts.index("Q") + 1])
    return None
