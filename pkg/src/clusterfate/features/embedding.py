"""Distance features between a node's embedding, its cluster and the rest.

Cluster level (``come.in.*``): distance to the own community mean and the
max/min/mean distance to the other members of the cluster. Network level
(``come.out.*``): distance to the nearest other community mean and the
max/min/mean distance to nodes outside the cluster.
"""

from __future__ import annotations

import numpy as np

from ..communities import Clustering
from ..embeddings import EmbeddingTable
from ..errors import ConfigError, DataError
from . import FeatureFrame

METRICS = ("euclidean", "cosine", "l1")
COLUMNS = (
    "come.in.dist_median",
    "come.in.max",
    "come.in.min",
    "come.in.avg",
    "come.out.dist_median",
    "come.out.max",
    "come.out.min",
    "come.out.avg",
)


def pairwise(A, B, metric="euclidean"):
    """Distance matrix between the rows of ``A`` and ``B``."""
    if metric == "euclidean":
        aa = np.einsum("ij,ij->i", A, A)
        bb = np.einsum("ij,ij->i", B, B)
        d2 = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
        return np.sqrt(np.maximum(d2, 0.0))
    if metric == "cosine":
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        na[na == 0] = 1.0
        nb[nb == 0] = 1.0
        return np.maximum(1.0 - (A / na[:, None]) @ (B / nb[:, None]).T, 0.0)
    if metric == "l1":
        out = np.empty((len(A), len(B)))
        step = max(1, 2**22 // max(1, B.size))
        for i in range(0, len(A), step):
            out[i:i + step] = np.abs(A[i:i + step, None, :] - B[None, :, :]).sum(axis=2)
        return out
    raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _masked_stats(D, mask):
    cnt = mask.sum(axis=1)
    has = cnt > 0
    mx = np.where(has, np.where(mask, D, -np.inf).max(axis=1), 0.0)
    mn = np.where(has, np.where(mask, D, np.inf).min(axis=1), 0.0)
    avg = np.where(mask, D, 0.0).sum(axis=1) / np.maximum(cnt, 1)
    return mx, mn, avg, ~has


def embedding_feature_frame(
    emb: EmbeddingTable, c: Clustering, gaussians, metric: str = "euclidean", block: int = 1024
) -> FeatureFrame:
    """Eight distance features for every node in ``emb``.

    A node is excluded from its own member aggregates. Aggregates over an
    empty set (singleton cluster, or a snapshot with a single cluster) are
    reported as 0 and flagged in ``degenerate_in`` / ``degenerate_out``.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
    means = np.zeros((c.m, emb.dim))
    for g in gaussians:
        if not 0 <= g.cluster_id < c.m:
            raise DataError(f"community {g.cluster_id} has no cluster in snapshot {c.snapshot_index}")
        means[g.cluster_id] = g.mean
    X = np.asarray(emb.vectors, dtype=float)
    if metric == "euclidean":
        # translating everything is free for euclidean distances and keeps the
        # Gram-matrix expansion well conditioned
        shift = X.mean(axis=0)
        X = X - shift
        means = means - shift
    try:
        labels = np.array([c[v] for v in emb.node_ids.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"node {exc.args[0]} has no cluster in snapshot {c.snapshot_index}") from None

    n = len(X)
    out = np.zeros((n, len(COLUMNS)))
    flag_in = np.zeros(n, dtype=bool)
    flag_out = np.zeros(n, dtype=bool)
    Dm = pairwise(X, means, metric)
    rows = np.arange(n)
    out[:, 0] = Dm[rows, labels]
    if c.m > 1:
        other = Dm.copy()
        other[rows, labels] = np.inf
        out[:, 4] = other.min(axis=1)
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        D = pairwise(X[lo:hi], X, metric)
        same = labels[lo:hi, None] == labels[None, :]
        own = same.copy()
        own[np.arange(hi - lo), np.arange(lo, hi)] = False
        mx, mn, avg, empty = _masked_stats(D, own)
        out[lo:hi, 1], out[lo:hi, 2], out[lo:hi, 3] = mx, mn, avg
        flag_in[lo:hi] = empty
        mx, mn, avg, empty = _masked_stats(D, ~same)
        out[lo:hi, 5], out[lo:hi, 6], out[lo:hi, 7] = mx, mn, avg
        flag_out[lo:hi] = empty
    flags = {"degenerate_in": flag_in, "degenerate_out": flag_out}
    return FeatureFrame(emb.snapshot_index, emb.node_ids, COLUMNS, out, flags)


def embedding_features(emb, c, gaussians, v, metric="euclidean") -> dict:
    """Feature row of node ``v`` including its two degeneracy flags."""
    frame = embedding_feature_frame(emb, c, gaussians, metric)
    i = frame.row_of()[v]
    row = dict(zip(COLUMNS, frame.values[i].tolist()))
    row["degenerate_in"] = bool(frame.flags["degenerate_in"][i])
    row["degenerate_out"] = bool(frame.flags["degenerate_out"][i])
    return row


def delta(features: dict) -> float:
    """Distance to the nearest other community mean minus distance to the own mean."""
    if features.get("degenerate_out"):
        raise DataError("delta is undefined when the snapshot has a single cluster")
    return features["come.out.dist_median"] - features["come.in.dist_median"]


def delta_values(frame: FeatureFrame) -> np.ndarray:
    if frame.flags.get("degenerate_out", np.zeros(1, bool)).any():
        raise DataError("delta is undefined when the snapshot has a single cluster")
    i_own = frame.columns.index("come.in.dist_median")
    i_other = frame.columns.index("come.out.dist_median")
    return frame.values[:, i_other] - frame.values[:, i_own]
