import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterfate.communities import Clustering
from clusterfate.errors import ConfigError
from clusterfate.graph import Snapshot
from clusterfate.tracking import (
    NodeLabel,
    State,
    label_nodes,
    map_clusters,
    project_variant,
    read_labels,
    track,
    write_labels,
    write_lineage,
)


def snap(index, nodes):
    return Snapshot.from_edges(index, [], nodes=nodes)


def worked_example():
    # t: C1={1,2,3} (id 0), C2={4,5} (id 1); t+1: A={1,2,4} (id 0), B={3,5} (id 1)
    c_t = Clustering(0, {1: 0, 2: 0, 3: 0, 4: 1, 5: 1})
    c_n = Clustering(1, {1: 0, 2: 0, 4: 0, 3: 1, 5: 1})
    return c_t, c_n


def test_identical_clusterings_map_to_identity():
    c = Clustering(0, {v: v % 3 for v in range(12)})
    lm = map_clusters(c, Clustering(1, dict(c.assignment)))
    assert lm.predecessor == {0: 0, 1: 1, 2: 2}
    assert lm.lineage == {0: 0, 1: 1, 2: 2}


def test_worked_example_mapping_and_labels():
    c_t, c_n = worked_example()
    lm = map_clusters(c_t, c_n)
    assert lm.predecessor == {0: 0, 1: 1}
    assert lm.overlap == {0: 2.0, 1: 1.0}
    labels = label_nodes(snap(0, range(1, 6)), snap(1, range(1, 6)), c_t, c_n, lm)
    states = {lab.node: lab.state for lab in labels}
    assert states == {1: State.STAY, 2: State.STAY, 3: State.MOVE, 4: State.MOVE, 5: State.STAY}


def test_disjoint_cluster_opens_new_lineage():
    c_t = Clustering(0, {1: 0, 2: 0})
    c_n = Clustering(1, {1: 0, 2: 0, 8: 1, 9: 1})
    lm = map_clusters(c_t, c_n)
    assert lm.lineage == {0: 0, 1: 1}
    assert 1 not in lm.predecessor


def test_absent_node_drops():
    c_t = Clustering(0, {1: 0, 2: 0, 3: 0})
    c_n = Clustering(1, {1: 0, 2: 0})
    labels = label_nodes(snap(0, [1, 2, 3]), snap(1, [1, 2]), c_t, c_n, map_clusters(c_t, c_n))
    assert {lab.node: lab.state for lab in labels}[3] == State.DROP


def test_ties_prefer_lower_ids():
    c_t = Clustering(0, {1: 0, 2: 1})
    c_n = Clustering(1, {1: 0, 2: 0})
    assert map_clusters(c_t, c_n).predecessor == {0: 0}


def test_jaccard_option():
    # X shares 5 nodes with the big cluster A and 4 with the small cluster B:
    # overlap picks A, Jaccard (5/14 < 4/9) picks B
    c_t = Clustering(0, {**{v: 0 for v in range(10)}, **{v: 1 for v in range(10, 14)}})
    c_n = Clustering(1, {v: 0 for v in [*range(5), *range(10, 14)]})
    assert map_clusters(c_t, c_n, "overlap").predecessor == {0: 0}
    assert map_clusters(c_t, c_n, "jaccard").predecessor == {0: 1}
    with pytest.raises(ConfigError):
        map_clusters(c_t, c_n, "cosine")


def test_projections():
    labels = [NodeLabel(1, 0, State.STAY), NodeLabel(2, 0, State.MOVE), NodeLabel(3, 0, State.DROP)]
    assert [lab.state for lab in project_variant(labels, "SL")] == [State.STAY, State.LEAVE, State.LEAVE]
    assert [lab.state for lab in project_variant(labels, "SM")] == [State.STAY, State.MOVE]
    assert project_variant(labels, "SMD") == labels
    with pytest.raises(ConfigError):
        project_variant(labels, "XY")


def random_pair(seed):
    rng = np.random.default_rng(seed)
    nodes_t = rng.choice(60, 40, replace=False).tolist()
    nodes_n = rng.choice(60, 40, replace=False).tolist()
    c_t = Clustering.from_labels(0, nodes_t, rng.integers(0, 5, 40))
    c_n = Clustering.from_labels(1, nodes_n, rng.integers(0, 5, 40))
    return snap(0, nodes_t), snap(1, nodes_n), c_t, c_n


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_label_invariants(seed):
    s_t, s_n, c_t, c_n = random_pair(seed)
    lm = map_clusters(c_t, c_n)
    assert len(set(lm.predecessor.values())) == len(lm.predecessor)
    labels = label_nodes(s_t, s_n, c_t, c_n, lm)
    assert sorted(lab.node for lab in labels) == sorted(s_t.nodes)
    drops = {lab.node for lab in labels if lab.state == State.DROP}
    assert drops == set(s_t.nodes) - set(s_n.nodes)
    # drops ignore the clusterings
    other_t = Clustering.from_labels(0, s_t.nodes, np.zeros(len(s_t), int))
    other = label_nodes(s_t, s_n, other_t, c_n, map_clusters(other_t, c_n))
    assert {lab.node for lab in other if lab.state == State.DROP} == drops


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_greedy_choice_dominates_rejected_alternatives(seed):
    from clusterfate.tracking import overlap_table

    _, _, c_t, c_n = random_pair(seed)
    lm = map_clusters(c_t, c_n)
    table = overlap_table(c_t, c_n)
    for dst, src in lm.predecessor.items():
        # no still-free pair with a larger overlap existed when (src, dst) was taken
        for (a, b), n in table.items():
            if n > table[src, dst]:
                assert a in lm.successor or b in lm.predecessor


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(2, 5))
def test_matched_node_sets_survive_relabelling(seed, k_t, k_n):
    # distinct overlap counts by construction, so the greedy order is tie-free
    rng = np.random.default_rng(seed)
    counts = rng.permutation(np.arange(1, k_t * k_n + 1)).reshape(k_t, k_n)
    a_t, a_n, v = {}, {}, 0
    for i in range(k_t):
        for j in range(k_n):
            for _ in range(counts[i, j]):
                a_t[v], a_n[v] = i, j
                v += 1
    c_t, c_n = Clustering(0, a_t), Clustering(1, a_n)
    pt, pn = rng.permutation(k_t), rng.permutation(k_n)
    r_t = Clustering(0, {u: int(pt[k]) for u, k in a_t.items()})
    r_n = Clustering(1, {u: int(pn[k]) for u, k in a_n.items()})

    def matched_sets(c0, c1):
        lm = map_clusters(c0, c1)
        return {(frozenset(c0.members[src]), frozenset(c1.members[dst])) for dst, src in lm.predecessor.items()}

    assert matched_sets(c_t, c_n) == matched_sets(r_t, r_n)


def test_track_assigns_fresh_lineages_across_snapshots():
    cs = [
        Clustering(0, {1: 0, 2: 0, 3: 1}),
        Clustering(1, {1: 0, 2: 0, 7: 1}),
        Clustering(2, {1: 0, 7: 1, 8: 2}),
    ]
    maps = track(cs)
    assert maps[0].lineage == {0: 0, 1: 2}
    assert maps[1].lineage == {0: 0, 1: 2, 2: 3}


def test_label_and_lineage_files(tmp_path):
    labels = [NodeLabel(1, 0, State.STAY), NodeLabel(2, 0, State.DROP)]
    write_labels(labels, tmp_path / "l.txt")
    assert read_labels(tmp_path / "l.txt") == labels
    c_t, c_n = worked_example()
    write_lineage([map_clusters(c_t, c_n)], tmp_path / "lin.txt", first=c_t)
    rows = (tmp_path / "lin.txt").read_text().split("\n")
    assert rows[:4] == ["0 0 0", "0 1 1", "1 0 0", "1 1 1"]
