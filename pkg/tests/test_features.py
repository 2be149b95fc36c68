import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from clusterfate.communities import Clustering
from clusterfate.embeddings import CommunityGaussian, EmbeddingTable
from clusterfate.errors import DataError
from clusterfate.features import concat_frames, read_frame, select_columns, write_frame
from clusterfate.features.classic import COLUMNS as CLASSIC, classic_feature_frame, classic_features
from clusterfate.features.embedding import (
    COLUMNS as COME,
    delta,
    delta_values,
    embedding_feature_frame,
    embedding_features,
)
from clusterfate.graph import Snapshot

# --- classic ---------------------------------------------------------------


def clique_plus_bridge():
    # two triangles {0,1,2} and {4,5,6} joined through node 3
    edges = [(0, 1), (1, 2), (0, 2), (4, 5), (5, 6), (4, 6), (2, 3), (3, 4)]
    s = Snapshot.from_edges(0, edges)
    c = Clustering(0, {0: 0, 1: 0, 2: 0, 3: 0, 4: 1, 5: 1, 6: 1})
    return s, c


def test_clique_in_degree():
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)] + [(4, 5)]
    s = Snapshot.from_edges(0, edges)
    c = Clustering(0, {**{i: 0 for i in range(5)}, 5: 1})
    assert classic_features(s, c, 0)["classic.in.degree"] == 4


def test_singleton_cluster_has_zero_in_level():
    s, _ = clique_plus_bridge()
    c = Clustering(0, {0: 0, 1: 0, 2: 0, 3: 1, 4: 2, 5: 2, 6: 2})
    row = classic_features(s, c, 3)
    assert all(row[f"classic.in.{m}"] == 0 for m in ("degree", "betweenness", "closeness", "eigenvector"))


def test_bridge_betweenness_levels():
    s, c = clique_plus_bridge()
    row = classic_features(s, c, 3)
    # out: 3 separates {0,1,2} from {4,5,6}: 9 pairs; in: 3 is a leaf of its cluster
    assert row["classic.out.betweenness"] == pytest.approx(9.0)
    assert row["classic.in.betweenness"] == 0.0


def test_absent_node_raises():
    s, c = clique_plus_bridge()
    with pytest.raises(KeyError):
        classic_features(s, c, 42)


def random_clustered(seed, n=25):
    rng = np.random.default_rng(seed)
    edges = [(int(u), int(v)) for u, v in rng.integers(0, n, (3 * n, 2))]
    s = Snapshot.from_edges(0, edges, nodes=range(n))
    c = Clustering.from_labels(0, s.nodes, rng.integers(0, 3, len(s)))
    return s, c


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_classic_invariants(seed):
    s, c = random_clustered(seed)
    f = classic_feature_frame(s, c)
    assert f.columns == CLASSIC
    assert np.all(np.isfinite(f.values)) and np.all(f.values >= 0)
    assert np.all(f.values[:, 0] <= f.values[:, 4])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_classic_features_relabel_invariant(seed):
    s, c = random_clustered(seed, 15)
    perm = np.random.default_rng(seed).permutation(100)[: len(s)] + 1000
    m = dict(zip(s.nodes, perm.tolist()))
    s2 = Snapshot.from_edges(0, [(m[u], m[v]) for u, v in s.edges()], nodes=m.values())
    c2 = Clustering(0, {m[v]: k for v, k in c.assignment.items()})
    f1, f2 = classic_feature_frame(s, c), classic_feature_frame(s2, c2)
    for v in s.nodes:
        assert np.allclose(f1.values[f1.row_of()[v]], f2.values[f2.row_of()[m[v]]], atol=1e-9)


# --- embedding distances ---------------------------------------------------


def one_d_case():
    # cluster 0: v=0 at 0, members at 1 and 3, mean 2; cluster 1: {10, 12}, mean 11
    emb = EmbeddingTable(0, np.arange(5), np.array([[0.0], [1.0], [3.0], [10.0], [12.0]]))
    c = Clustering(0, {0: 0, 1: 0, 2: 0, 3: 1, 4: 1})
    gauss = [
        CommunityGaussian(0, np.array([2.0]), np.ones(1), 0.6),
        CommunityGaussian(1, np.array([11.0]), np.ones(1), 0.4),
    ]
    return emb, c, gauss


def test_hand_computed_one_d_example():
    emb, c, gauss = one_d_case()
    row = embedding_features(emb, c, gauss, 0)
    assert row["come.in.dist_median"] == pytest.approx(2.0)
    assert row["come.in.min"] == pytest.approx(1.0)
    assert row["come.in.max"] == pytest.approx(3.0)
    assert row["come.in.avg"] == pytest.approx(2.0)
    assert row["come.out.dist_median"] == pytest.approx(11.0)
    assert row["come.out.min"] == pytest.approx(10.0)
    assert row["come.out.max"] == pytest.approx(12.0)
    assert row["come.out.avg"] == pytest.approx(11.0)
    assert delta(row) == pytest.approx(9.0)


def test_node_at_its_mean():
    emb, c, gauss = one_d_case()
    gauss[0] = CommunityGaussian(0, np.array([0.0]), np.ones(1), 0.6)
    gauss[1] = CommunityGaussian(1, np.array([5.0]), np.ones(1), 0.4)
    row = embedding_features(emb, c, gauss, 0)
    assert row["come.in.dist_median"] == 0.0
    assert delta(row) == pytest.approx(5.0)


def test_equidistant_delta_is_zero():
    emb, c, gauss = one_d_case()
    gauss[0] = CommunityGaussian(0, np.array([-4.0]), np.ones(1), 0.6)
    gauss[1] = CommunityGaussian(1, np.array([4.0]), np.ones(1), 0.4)
    assert delta(embedding_features(emb, c, gauss, 0)) == pytest.approx(0.0)


def test_single_cluster_is_flagged():
    emb, _, gauss = one_d_case()
    c = Clustering(0, {v: 0 for v in range(5)})
    f = embedding_feature_frame(emb, c, gauss[:1])
    assert f.flags["degenerate_out"].all() and not f.flags["degenerate_in"].any()
    assert np.all(f.values[:, 4:] == 0)
    with pytest.raises(DataError):
        delta(embedding_features(emb, c, gauss[:1], 0))
    with pytest.raises(DataError):
        delta_values(f)


def test_singleton_cluster_is_flagged():
    emb, _, gauss = one_d_case()
    c = Clustering(0, {0: 0, 1: 1, 2: 1, 3: 1, 4: 1})
    f = embedding_feature_frame(emb, c, gauss)
    assert f.flags["degenerate_in"].tolist() == [True, False, False, False, False]
    assert np.all(f.values[0, 1:4] == 0)


def random_embedding(seed, n=40, d=6, k=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * 3
    labels = rng.integers(0, k, n)
    labels[:k] = np.arange(k)
    c = Clustering.from_labels(0, range(n), labels)
    lab = np.array([c[v] for v in range(n)])
    gauss = [CommunityGaussian(j, X[lab == j].mean(axis=0), np.ones(d), 1.0 / k) for j in range(k)]
    return EmbeddingTable(0, np.arange(n), X), c, gauss, lab


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["euclidean", "cosine", "l1"]))
def test_min_avg_max_ordering(seed, metric):
    emb, c, gauss, _ = random_embedding(seed)
    v = embedding_feature_frame(emb, c, gauss, metric).values
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    assert np.all(v[:, 2] <= v[:, 3] + 1e-12) and np.all(v[:, 3] <= v[:, 1] + 1e-12)
    assert np.all(v[:, 6] <= v[:, 7] + 1e-12) and np.all(v[:, 7] <= v[:, 5] + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_orthogonal_transform_and_translation_invariance(seed):
    emb, c, gauss, lab = random_embedding(seed)
    rng = np.random.default_rng(seed + 1)
    Q = ortho_group.rvs(emb.dim, random_state=seed)
    shift = rng.normal(size=emb.dim) * 50
    Y = emb.vectors @ Q.T + shift
    gauss2 = [CommunityGaussian(g.cluster_id, Y[lab == g.cluster_id].mean(axis=0), g.covariance, g.weight) for g in gauss]
    a = embedding_feature_frame(emb, c, gauss).values
    b = embedding_feature_frame(EmbeddingTable(0, emb.node_ids, Y), c, gauss2).values
    assert np.max(np.abs(a - b)) <= 1e-9


def test_block_size_does_not_change_results():
    emb, c, gauss, _ = random_embedding(3, n=50)
    a = embedding_feature_frame(emb, c, gauss, block=7).values
    b = embedding_feature_frame(emb, c, gauss, block=1000).values
    assert np.allclose(a, b, atol=1e-12)


def test_cosine_and_l1_against_direct_loops():
    emb, c, gauss, lab = random_embedding(5, n=12, d=3)
    X = emb.vectors
    for metric, dist in (
        ("l1", lambda a, b: np.abs(a - b).sum()),
        ("cosine", lambda a, b: 1 - a @ b / np.linalg.norm(a) / np.linalg.norm(b)),
    ):
        f = embedding_feature_frame(emb, c, gauss, metric)
        for i in range(len(X)):
            own = [dist(X[i], X[j]) for j in range(len(X)) if j != i and lab[j] == lab[i]]
            other = [dist(X[i], X[j]) for j in range(len(X)) if lab[j] != lab[i]]
            row = f.values[i]
            assert row[0] == pytest.approx(dist(X[i], gauss[lab[i]].mean), abs=1e-9)
            assert row[1:4] == pytest.approx([max(own), min(own), np.mean(own)], abs=1e-9)
            assert row[5:8] == pytest.approx([max(other), min(other), np.mean(other)], abs=1e-9)


# --- frames ----------------------------------------------------------------


def test_select_columns_levels():
    cols = CLASSIC + COME
    assert select_columns(cols, "all", "in") == [c for c in cols if ".in." in c]
    assert select_columns(cols, "come", "all") == list(COME)
    assert select_columns(cols, "all", "all") == list(cols)


def test_frame_round_trip(tmp_path):
    s, c = clique_plus_bridge()
    emb = EmbeddingTable(0, np.array(s.nodes), np.random.default_rng(0).normal(size=(len(s), 3)))
    lab = np.array([c[v] for v in s.nodes])
    gauss = [CommunityGaussian(j, emb.vectors[lab == j].mean(axis=0), np.ones(3), 0.5) for j in range(2)]
    f = concat_frames(classic_feature_frame(s, c), embedding_feature_frame(emb, c, gauss))
    write_frame(f, tmp_path / "f.csv")
    g = read_frame(tmp_path / "f.csv")
    assert g.columns == f.columns and np.array_equal(g.values, f.values)
    assert all(np.array_equal(g.flags[k], f.flags[k]) for k in f.flags)
