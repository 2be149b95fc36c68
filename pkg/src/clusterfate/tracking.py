"""Cluster correspondence across consecutive snapshots and node evolution labels."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .communities import Clustering
from .errors import ConfigError, ParseError
from .graph import Snapshot

VARIANTS = ("SMD", "SL", "SM")
SIMILARITIES = ("overlap", "jaccard")


class State(str, enum.Enum):
    STAY = "stay"
    MOVE = "move"
    DROP = "drop"
    LEAVE = "leave"

    def __str__(self):
        return self.value


class NodeLabel(NamedTuple):
    node: int
    snapshot: int
    state: State


@dataclass(frozen=True)
class LineageMap:
    """Matching between the clusters of snapshot ``snapshot_index`` and the next one.

    ``predecessor`` maps a matched cluster at ``i+1`` to its cluster at ``i``;
    ``lineage`` gives every cluster at ``i+1`` its lineage id (inherited when
    matched, fresh otherwise).
    """

    snapshot_index: int
    predecessor: Mapping[int, int]
    lineage: Mapping[int, int]
    overlap: Mapping[int, float]

    @property
    def successor(self) -> dict:
        return {p: q for q, p in self.predecessor.items()}


def overlap_table(c_i: Clustering, c_next: Clustering) -> Counter:
    """Common-node counts keyed by ``(cluster at i, cluster at i+1)``."""
    table: Counter = Counter()
    for v, ci in c_i.assignment.items():
        cn = c_next.assignment.get(v)
        if cn is not None:
            table[ci, cn] += 1
    return table


def map_clusters(
    c_i: Clustering,
    c_next: Clustering,
    similarity: str = "overlap",
    prev_lineage: Mapping[int, int] | None = None,
    next_lineage_id: int | None = None,
) -> LineageMap:
    """Greedy one-to-one matching by decreasing similarity.

    Pairs are visited by decreasing common-node count (or Jaccard index),
    ties broken by lower source then lower target id; a pair is accepted when
    both sides are still free and they share at least one node. Clusters at
    ``i+1`` left unmatched open new lineages numbered from ``next_lineage_id``
    (default: one past the largest lineage id at ``i``).
    """
    if similarity not in SIMILARITIES:
        raise ConfigError(f"unknown similarity {similarity!r}; expected one of {SIMILARITIES}")
    table = overlap_table(c_i, c_next)
    if similarity == "jaccard":
        size_i = Counter(c_i.assignment.values())
        size_n = Counter(c_next.assignment.values())
        score = {k: n / (size_i[k[0]] + size_n[k[1]] - n) for k, n in table.items()}
    else:
        score = {k: float(n) for k, n in table.items()}
    ranked = sorted(score, key=lambda k: (-score[k], k[0], k[1]))

    predecessor: dict[int, int] = {}
    matched_src: set = set()
    for src, dst in ranked:
        if src in matched_src or dst in predecessor:
            continue
        predecessor[dst] = src
        matched_src.add(src)

    if prev_lineage is None:
        prev_lineage = {j: j for j in range(c_i.m)}
    fresh = next_lineage_id
    if fresh is None:
        fresh = max(prev_lineage.values(), default=-1) + 1
    lineage = {}
    for dst in range(c_next.m):
        if dst in predecessor:
            lineage[dst] = prev_lineage[predecessor[dst]]
        else:
            lineage[dst] = fresh
            fresh += 1
    overlap = {dst: score[src, dst] for dst, src in predecessor.items()}
    return LineageMap(c_i.snapshot_index, predecessor, lineage, overlap)


def track(clusterings: Sequence[Clustering], similarity: str = "overlap") -> list[LineageMap]:
    """Lineage maps for every consecutive pair; lineages of the first snapshot
    are its cluster ids."""
    maps = []
    lineage = {j: j for j in range(clusterings[0].m)} if clusterings else {}
    next_id = len(lineage)
    for c_i, c_next in zip(clusterings, clusterings[1:]):
        lm = map_clusters(c_i, c_next, similarity, prev_lineage=lineage, next_lineage_id=next_id)
        next_id = max([next_id - 1, *lm.lineage.values()]) + 1
        lineage = dict(lm.lineage)
        maps.append(lm)
    return maps


def label_nodes(s_i: Snapshot, s_next: Snapshot, c_i: Clustering, c_next: Clustering, lm: LineageMap) -> list[NodeLabel]:
    """Stay/Move/Drop label of every node of snapshot ``i``."""
    labels = []
    succ = lm.successor
    for v in s_i.nodes:
        if v not in s_next:
            state = State.DROP
        elif succ.get(c_i[v]) == c_next[v]:
            state = State.STAY
        else:
            state = State.MOVE
        labels.append(NodeLabel(v, s_i.index, state))
    return labels


def project_variant(labels: Sequence[NodeLabel], variant: str) -> list[NodeLabel]:
    """SMD labels projected to SL (move/drop -> leave) or SM (drop removed)."""
    if variant == "SMD":
        return list(labels)
    if variant == "SL":
        return [lab if lab.state == State.STAY else lab._replace(state=State.LEAVE) for lab in labels]
    if variant == "SM":
        return [lab for lab in labels if lab.state != State.DROP]
    raise ConfigError(f"unknown problem variant {variant!r}; expected one of {VARIANTS}")


def project_state(state: State, variant: str) -> State | None:
    """Single-label projection; ``None`` when the variant discards the instance."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown problem variant {variant!r}; expected one of {VARIANTS}")
    if variant == "SL" and state != State.STAY:
        return State.LEAVE
    if variant == "SM" and state == State.DROP:
        return None
    return state


def write_labels(labels: Sequence[NodeLabel], path):
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(f"{lab.node} {lab.snapshot} {lab.state.value}\n")


def read_labels(path) -> list[NodeLabel]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            if len(tok) != 3:
                raise ParseError("expected 'node_id snapshot_i label'", lineno)
            try:
                out.append(NodeLabel(int(tok[0]), int(tok[1]), State(tok[2])))
            except ValueError:
                raise ParseError(f"bad label line {line.strip()!r}", lineno) from None
    return out


def write_lineage(maps: Sequence[LineageMap], path, first: Clustering | None = None):
    """``snapshot cluster lineage`` rows; the first snapshot's clusters are their own roots."""
    with open(path, "w", encoding="utf-8") as fh:
        if first is not None:
            for j in range(first.m):
                fh.write(f"{first.snapshot_index} {j} {j}\n")
        for lm in maps:
            for dst in sorted(lm.lineage):
                fh.write(f"{lm.snapshot_index + 1} {dst} {lm.lineage[dst]}\n")


def labels_by_transition(labels: Sequence[NodeLabel]) -> dict:
    """Group labels as ``{snapshot_i: {node: State}}``."""
    out: dict = {}
    for lab in labels:
        out.setdefault(lab.snapshot, {})[lab.node] = lab.state
    return out
