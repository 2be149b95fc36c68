"""Degree, betweenness, closeness and eigenvector centrality at two levels.

The ``in`` level evaluates each measure on the subgraph induced by the
node's cluster, the ``out`` level on the whole snapshot.
"""

from __future__ import annotations

import warnings

import numpy as np

from .. import centrality
from ..communities import Clustering
from ..graph import Snapshot
from . import FeatureFrame

MEASURES = ("degree", "betweenness", "closeness", "eigenvector")
COLUMNS = tuple(f"classic.{lvl}.{m}" for lvl in ("in", "out") for m in MEASURES)


def _measures(indptr, indices, tol, max_iter):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eig = centrality.eigenvector(indptr, indices, tol=tol, max_iter=max_iter)
    return np.column_stack(
        [
            np.diff(indptr).astype(float),
            centrality.betweenness(indptr, indices),
            centrality.closeness(indptr, indices),
            eig,
        ]
    )


def induced_csr(indptr, indices, members):
    """CSR of the subgraph induced by local node positions ``members``."""
    members = np.asarray(members, dtype=np.int64)
    local = np.full(len(indptr) - 1, -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    sub_ptr = np.zeros(len(members) + 1, dtype=np.int64)
    parts = []
    for i, v in enumerate(members):
        nb = local[indices[indptr[v]:indptr[v + 1]]]
        nb = nb[nb >= 0]
        parts.append(nb)
        sub_ptr[i + 1] = sub_ptr[i] + len(nb)
    sub_idx = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return sub_ptr, sub_idx


def classic_feature_frame(s: Snapshot, c: Clustering, tol=1e-8, max_iter=1000) -> FeatureFrame:
    node_ids, indptr, indices = s.csr
    out = _measures(indptr, indices, tol, max_iter)
    inner = np.zeros_like(out)
    pos = {v: i for i, v in enumerate(node_ids.tolist())}
    for members in c.members:
        local = np.array([pos[v] for v in members], dtype=np.int64)
        sub_ptr, sub_idx = induced_csr(indptr, indices, local)
        inner[local] = _measures(sub_ptr, sub_idx, tol, max_iter)
    return FeatureFrame(s.index, node_ids, COLUMNS, np.hstack([inner, out]))


def classic_features(s: Snapshot, c: Clustering, v) -> dict:
    """Classic feature row of a single node."""
    if v not in s:
        raise KeyError(f"node {v} is not in snapshot {s.index}")
    return classic_feature_frame(s, c).row(v)
