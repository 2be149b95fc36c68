"""Unweighted centralities on CSR adjacency (local indices).

All kernels take ``indptr, indices`` for a simple undirected graph and
return one value per local node.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np


@numba.njit(cache=True)
def _brandes(indptr, indices):
    n = indptr.shape[0] - 1
    bc = np.zeros(n)
    sigma = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    delta = np.zeros(n)
    stack = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        for i in range(n):
            sigma[i] = 0.0
            dist[i] = -1
            delta[i] = 0.0
        sigma[s] = 1.0
        dist[s] = 0
        head, tail, top = 0, 1, 0
        queue[0] = s
        while head < tail:
            v = queue[head]
            head += 1
            stack[top] = v
            top += 1
            for p in range(indptr[v], indptr[v + 1]):
                w = indices[p]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        while top > 0:
            top -= 1
            w = stack[top]
            for p in range(indptr[w], indptr[w + 1]):
                v = indices[p]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    # every unordered pair was counted from both endpoints
    return bc / 2.0


@numba.njit(cache=True)
def _closeness(indptr, indices):
    n = indptr.shape[0] - 1
    out = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    if n < 2:
        return out
    for s in range(n):
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        head, tail = 0, 1
        queue[0] = s
        total = 0
        while head < tail:
            v = queue[head]
            head += 1
            total += dist[v]
            for p in range(indptr[v], indptr[v + 1]):
                w = indices[p]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
        reach = tail - 1
        if total > 0:
            out[s] = (reach / total) * (reach / (n - 1.0))
    return out


def betweenness(indptr, indices) -> np.ndarray:
    """Unnormalised shortest-path betweenness (Brandes), unordered pairs."""
    return _brandes(np.asarray(indptr, np.int64), np.asarray(indices, np.int64))


def closeness(indptr, indices) -> np.ndarray:
    """Closeness with the Wasserman-Faust scaling for disconnected graphs."""
    return _closeness(np.asarray(indptr, np.int64), np.asarray(indices, np.int64))


@numba.njit(cache=True)
def _spmv_shifted(indptr, indices, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = x[i]
        for p in range(indptr[i], indptr[i + 1]):
            acc += x[indices[p]]
        out[i] = acc


def eigenvector(indptr, indices, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Power iteration on ``A + I`` from the all-ones vector; L2-normalised.

    The identity shift leaves eigenvectors unchanged and avoids the
    oscillation of bipartite graphs. Iteration stops once the step between
    iterates, scaled by the growth factor, drops below ``tol``; the step
    itself is then below ``tol`` too and the eigen-residual is at most
    ``tol``. An edgeless graph yields zeros.
    """
    indptr = np.asarray(indptr, np.int64)
    indices = np.asarray(indices, np.int64)
    n = len(indptr) - 1
    if len(indices) == 0:
        if n > 0:
            warnings.warn("eigenvector centrality of an edgeless graph is all zero", RuntimeWarning, stacklevel=2)
        return np.zeros(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    y = np.empty(n)
    for _ in range(max_iter):
        _spmv_shifted(indptr, indices, x, y)
        growth = np.linalg.norm(y)
        y /= growth
        diff = np.linalg.norm(y - x)
        x, y = y, x
        if growth * diff < tol:
            break
    return x
