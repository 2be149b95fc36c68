"""Synthetic temporal clustered networks with planted memberships and churn.

Every snapshot is drawn from a degree-corrected planted partition: each node
splits its (persistent) degree into ``round(ratio * d)`` intra-cluster stubs
and the rest inter-cluster stubs, and stubs are matched configuration-model
style. Between snapshots a node drops out, moves to another cluster or stays.

Three knobs make the churn observable one snapshot ahead, the way a member
drifting toward another group already interacts with it:

* ``move_lead``: share of a future mover's inter-cluster stubs aimed at its
  destination cluster instead of a uniformly random other cluster;
* ``drop_fade``: degree multiplier of a node in its last snapshot before it
  drops out;
* ``restlessness``: Beta concentration of per-node move probabilities with
  mean ``p_move`` (``None`` gives every node exactly ``p_move``).

Setting ``move_lead=0``, ``drop_fade=1`` and ``restlessness=None`` yields
memoryless churn.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .communities import Clustering
from .errors import ConfigError, DataError
from .graph import Snapshot, TemporalEdgeList
from .tracking import NodeLabel, State

MAX_REWIRING_SWEEPS = 100


@dataclass(frozen=True)
class GenConfig:
    n_nodes: int = 1500
    n_clusters: int = 5
    n_snapshots: int = 10
    ratio: float = 0.7
    gamma: float = 2.5
    d_min: int = 5
    d_max: int = 100
    size_jitter: float = 0.1
    p_drop: float = 0.08
    p_move: float = 0.3
    replenish: bool = True
    move_lead: float = 0.5
    drop_fade: float = 0.2
    restlessness: float | None = 2.0
    seed: int = 0

    def validate(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must lie in (0, 1], got {self.ratio}")
        for name in ("p_drop", "p_move", "move_lead", "size_jitter"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if not 0.0 < self.drop_fade <= 1.0:
            raise ConfigError(f"drop_fade must lie in (0, 1], got {self.drop_fade}")
        if self.n_clusters < 2:
            raise ConfigError("the generator needs at least 2 clusters")
        if self.n_nodes < 2 * self.n_clusters:
            raise ConfigError("need at least two nodes per cluster")
        if not 1 <= self.d_min <= self.d_max < self.n_nodes:
            raise ConfigError(f"need 1 <= d_min <= d_max < n_nodes, got {self.d_min}, {self.d_max}, {self.n_nodes}")
        if self.n_snapshots < 1:
            raise ConfigError("n_snapshots must be >= 1")
        if self.restlessness is not None and self.restlessness <= 0:
            raise ConfigError("restlessness must be positive or None")


@dataclass
class GroundTruth:
    clusterings: list
    labels: dict  # snapshot i -> list[NodeLabel] for the transition i -> i+1
    warnings: list = field(default_factory=list)

    def all_labels(self) -> list:
        return [lab for i in sorted(self.labels) for lab in self.labels[i]]


def _round_half_up(x):
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


class _EdgeSet:
    def __init__(self):
        self.edges: set = set()

    def add(self, u, v) -> bool:
        if u == v:
            return False
        key = (u, v) if u < v else (v, u)
        if key in self.edges:
            return False
        self.edges.add(key)
        return True


def _pair_stubs(stubs, rng, es: _EdgeSet, reject=None):
    """Configuration-model pairing with bounded re-shuffling of rejected pairs.

    Stubs still unpaired after the sweeps are rewired into edges made here:
    ``(a, b)`` plus an edge ``(x, y)`` become ``(a, x)`` and ``(b, y)``.
    Returns the number of stubs left unmatched.
    """
    bad = (lambda a, b: False) if reject is None else reject
    pool = list(stubs)
    made = []
    for _ in range(MAX_REWIRING_SWEEPS):
        if len(pool) < 2:
            break
        rng.shuffle(pool)
        rest = []
        for a, b in zip(pool[0::2], pool[1::2]):
            if not bad(a, b) and es.add(a, b):
                made.append((a, b))
            else:
                rest.extend((a, b))
        if len(pool) % 2:
            rest.append(pool[-1])
        pool = rest
    rest = pool[len(pool) % 2:]
    pool = pool[:len(pool) % 2]
    for a, b in zip(rest[0::2], rest[1::2]):
        for _ in range(MAX_REWIRING_SWEEPS):
            if not made:
                break
            j = int(rng.integers(len(made)))
            x, y = made[j]
            if rng.random() < 0.5:
                x, y = y, x
            if bad(a, x) or bad(b, y) or a == x or b == y:
                continue
            if not es.add(a, x):
                continue
            if not es.add(b, y):
                es.edges.discard((a, x) if a < x else (x, a))
                continue
            es.edges.discard((x, y) if x < y else (y, x))
            made[j] = (a, x)
            made.append((b, y))
            break
        else:
            pool.extend((a, b))
            continue
        if not made:
            pool.extend((a, b))
    return len(pool)


class _Generator:
    def __init__(self, cfg: GenConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.warnings: list = []
        d = np.arange(cfg.d_min, cfg.d_max + 1)
        p = d.astype(float) ** -cfg.gamma
        self.deg_values, self.deg_p = d, p / p.sum()
        self.base_degree: dict = {}
        self.move_prob: dict = {}
        self.membership: dict = {}
        self.next_id = 0

    def _new_node(self, cluster):
        cfg, rng = self.cfg, self.rng
        v = self.next_id
        self.next_id += 1
        self.base_degree[v] = int(rng.choice(self.deg_values, p=self.deg_p))
        if cfg.restlessness is None or cfg.p_move in (0.0, 1.0):
            self.move_prob[v] = cfg.p_move
        else:
            k = cfg.restlessness
            self.move_prob[v] = float(rng.beta(cfg.p_move * k, (1.0 - cfg.p_move) * k))
        self.membership[v] = cluster
        return v

    def _initial_population(self):
        cfg, rng = self.cfg, self.rng
        k = cfg.n_clusters
        raw = (cfg.n_nodes / k) * (1.0 + rng.uniform(-cfg.size_jitter, cfg.size_jitter, k))
        sizes = np.maximum(_round_half_up(raw * cfg.n_nodes / raw.sum()), 2)
        sizes[np.argmax(sizes)] += cfg.n_nodes - sizes.sum()
        labels = rng.permutation(np.repeat(np.arange(k), sizes))
        for c in labels.tolist():
            self._new_node(c)

    def _draw_transitions(self):
        """Next-step fate of every current node: (State, destination cluster)."""
        cfg, rng = self.cfg, self.rng
        counts = np.bincount(list(self.membership.values()), minlength=cfg.n_clusters)
        fate = {}
        for v in sorted(self.membership):
            c = self.membership[v]
            if rng.random() < cfg.p_drop:
                state, dest = State.DROP, None
            elif rng.random() < self.move_prob[v]:
                dest = int(rng.integers(cfg.n_clusters - 1))
                dest += dest >= c
                state = State.MOVE
            else:
                state, dest = State.STAY, c
            if state != State.STAY and counts[c] <= 1:
                state, dest = State.STAY, c
            if state != State.STAY:
                counts[c] -= 1
                if dest is not None:
                    counts[dest] += 1
            fate[v] = (state, dest)
        return fate

    def _snapshot_edges(self, fate):
        cfg, rng = self.cfg, self.rng
        nodes = sorted(self.membership)
        memb = self.membership
        intra_stubs: dict = {c: [] for c in range(cfg.n_clusters)}
        inter_free: list = []
        targeted: list = []
        for v in nodes:
            d = self.base_degree[v]
            state, dest = fate.get(v, (State.STAY, memb[v]))
            if state == State.DROP and cfg.drop_fade < 1.0:
                d = max(1, int(_round_half_up(d * cfg.drop_fade)))
            n_in = int(_round_half_up(cfg.ratio * d))
            n_out = d - n_in
            intra_stubs[memb[v]].extend([v] * n_in)
            n_lead = int(_round_half_up(cfg.move_lead * n_out)) if state == State.MOVE else 0
            targeted.extend([(v, dest)] * n_lead)
            inter_free.extend([v] * (n_out - n_lead))

        es = _EdgeSet()
        leftover = 0
        for c in range(cfg.n_clusters):
            stubs = intra_stubs[c]
            if len(stubs) % 2:
                # an odd intra total cannot be matched; hand one stub to the
                # inter pool, or discard it when clusters are meant to be closed
                v = stubs.pop(int(rng.integers(len(stubs))))
                if cfg.ratio < 1.0:
                    inter_free.append(v)
            leftover += _pair_stubs(stubs, rng, es)

        by_cluster: dict = {c: [] for c in range(cfg.n_clusters)}
        for v in inter_free:
            by_cluster[memb[v]].append(v)
        for c in by_cluster:
            rng.shuffle(by_cluster[c])
        unplaced = []
        for i in rng.permutation(len(targeted)).tolist():
            v, dest = targeted[i]
            pool = by_cluster[dest]
            placed = False
            for j in range(len(pool) - 1, max(-1, len(pool) - 11), -1):
                if es.add(v, pool[j]):
                    pool.pop(j)
                    placed = True
                    break
            if not placed:
                unplaced.append(v)
        rest = [v for c in sorted(by_cluster) for v in by_cluster[c]] + unplaced
        if len(rest) % 2:
            # parity: one inter stub can never be matched
            rest.pop(int(rng.integers(len(rest))))
        leftover += _pair_stubs(rest, rng, es, reject=lambda a, b: memb[a] == memb[b])
        if leftover:
            self.warnings.append(f"{leftover} stubs left unmatched after {MAX_REWIRING_SWEEPS} rewiring sweeps")
        return sorted(es.edges)

    def run(self):
        cfg, rng = self.cfg, self.rng
        self._initial_population()
        snapshots, clusterings, labels = [], [], {}
        for t in range(cfg.n_snapshots):
            fate = self._draw_transitions() if t < cfg.n_snapshots - 1 else {}
            edges = self._snapshot_edges(fate)
            snapshots.append(Snapshot.from_edges(t, edges, nodes=self.membership))
            clusterings.append(Clustering(t, dict(sorted(self.membership.items()))))
            if t == cfg.n_snapshots - 1:
                break
            labels[t] = [NodeLabel(v, t, fate[v][0]) for v in sorted(fate)]
            dropped = 0
            for v, (state, dest) in fate.items():
                if state == State.DROP:
                    del self.membership[v]
                    dropped += 1
                elif state == State.MOVE:
                    self.membership[v] = dest
            if cfg.replenish:
                for _ in range(dropped):
                    self._new_node(int(rng.integers(cfg.n_clusters)))
        for w in self.warnings:
            warnings.warn(w, RuntimeWarning, stacklevel=3)
        return snapshots, GroundTruth(clusterings, labels, self.warnings)


def generate(cfg: GenConfig = GenConfig()):
    """Return ``(snapshots, GroundTruth)``; fully determined by ``cfg.seed``."""
    return _Generator(cfg).run()


def to_edge_list(snapshots) -> TemporalEdgeList:
    """Edges of all snapshots with the snapshot index as timestamp."""
    rows = [(u, v, s.index) for s in snapshots for u, v in s.edges()]
    if not rows:
        raise DataError("generated network has no edges")
    return TemporalEdgeList(np.asarray(rows, dtype=np.int64))


def intra_fraction(s: Snapshot, c: Clustering) -> float:
    """Fraction of edges whose endpoints share a cluster."""
    edges = list(s.edges())
    if not edges:
        return float("nan")
    return sum(c[u] == c[v] for u, v in edges) / len(edges)
