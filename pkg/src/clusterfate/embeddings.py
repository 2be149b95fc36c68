"""Node and community embeddings ("ComE-lite").

Uniform random walks feed a skip-gram model with negative sampling; a
diagonal Gaussian mixture fitted by EM over the node vectors supplies the
communities. A few refinement rounds fine-tune the skip-gram vectors with an
extra pull of every node toward the mean of its community and then re-fit
the mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .communities import Clustering
from .errors import ConfigError, ParseError
from .graph import Snapshot

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class EmbeddingParams:
    dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 10
    negatives: int = 5
    lr: float = 0.025
    epochs: int = 1
    refine_rounds: int = 3
    pull: float = 0.1
    gmm_restarts: int = 10


@dataclass(frozen=True, eq=False)
class WalkCorpus:
    """Walks stored as local node positions, right-padded with -1."""

    node_ids: np.ndarray
    steps: np.ndarray
    lengths: np.ndarray
    walks_per_node: int
    walk_length: int

    @property
    def walks(self) -> list[list[int]]:
        ids = self.node_ids
        return [ids[row[:n]].tolist() for row, n in zip(self.steps, self.lengths)]

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    snapshot_index: int
    node_ids: np.ndarray
    vectors: np.ndarray
    untrained: tuple = ()

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.node_ids)

    def vector(self, v) -> np.ndarray:
        i = int(np.searchsorted(self.node_ids, v))
        if i >= len(self.node_ids) or self.node_ids[i] != v:
            raise KeyError(v)
        return self.vectors[i]

    def as_dict(self) -> dict:
        return {int(v): self.vectors[i] for i, v in enumerate(self.node_ids)}


@dataclass(frozen=True, eq=False)
class CommunityGaussian:
    cluster_id: int
    mean: np.ndarray
    covariance: np.ndarray
    weight: float


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, walks_per_node, walk_length, seed):
    np.random.seed(seed)
    n = indptr.shape[0] - 1
    steps = np.full((n * walks_per_node, walk_length), -1, dtype=np.int64)
    lengths = np.zeros(n * walks_per_node, dtype=np.int64)
    row = 0
    for _ in range(walks_per_node):
        order = np.random.permutation(n)
        for start in order:
            v = start
            steps[row, 0] = v
            length = 1
            while length < walk_length:
                deg = indptr[v + 1] - indptr[v]
                if deg == 0:
                    break
                v = indices[indptr[v] + np.random.randint(0, deg)]
                steps[row, length] = v
                length += 1
            lengths[row] = length
            row += 1
    return steps, lengths


def random_walks(s: Snapshot, walks_per_node: int = 10, walk_length: int = 80, seed: int = 0) -> WalkCorpus:
    """``walks_per_node`` rounds of one walk per node, nodes shuffled each round.

    A walk visits at most ``walk_length`` nodes and stops early at a node
    without neighbours.
    """
    if walks_per_node < 1 or walk_length < 1:
        raise ConfigError("walks_per_node and walk_length must be >= 1")
    node_ids, indptr, indices = s.csr
    steps, lengths = _walk_kernel(indptr, indices, walks_per_node, walk_length, seed % (2**32))
    return WalkCorpus(node_ids, steps, lengths, walks_per_node, walk_length)


_SIGMOID_BOUND = 6.0
_SIGMOID_SIZE = 1000
_SIGMOID_TABLE = (
    1.0 / (1.0 + np.exp(-(np.arange(_SIGMOID_SIZE) / _SIGMOID_SIZE * 2.0 - 1.0) * _SIGMOID_BOUND))
).astype(np.float32)


@numba.njit(cache=True)
def _lcg(state):
    # 48-bit linear congruential step, as in the reference word2vec code
    return (state * np.uint64(25214903917) + np.uint64(11)) & np.uint64(0xFFFFFFFFFFFF)


@numba.njit(cache=True, fastmath=True)
def _sgns_kernel(steps, lengths, syn0, syn1, table, sigmoid, window, negatives, lr0, lr_end, epochs, seed, pull, means, assign):
    state = np.uint64(seed)
    d = syn0.shape[1]
    n_walks = steps.shape[0]
    n_table = np.uint64(table.shape[0])
    n_sig = sigmoid.shape[0]
    bound = np.float32(6.0)
    scale = np.float32(n_sig / 12.0)
    win = np.uint64(window)
    total = 0
    for w in range(n_walks):
        total += lengths[w]
    total *= epochs
    done = 0
    grad = np.zeros(d, dtype=np.float32)
    for _ in range(epochs):
        for w in range(n_walks):
            L = lengths[w]
            for pos in range(L):
                lr = np.float32(lr0 - (lr0 - lr_end) * done / total)
                done += 1
                center = steps[w, pos]
                state = _lcg(state)
                shrink = np.int64((state >> np.uint64(16)) % win)
                lo = max(0, pos - window + shrink)
                hi = min(L, pos + window - shrink + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    ctx = steps[w, cpos]
                    a = syn0[ctx]
                    for j in range(d):
                        grad[j] = 0.0
                    for s in range(negatives + 1):
                        if s == 0:
                            target = center
                            label = np.float32(1.0)
                        else:
                            state = _lcg(state)
                            target = table[(state >> np.uint64(16)) % n_table]
                            if target == center:
                                continue
                            label = np.float32(0.0)
                        b = syn1[target]
                        f = np.float32(0.0)
                        for j in range(d):
                            f += a[j] * b[j]
                        if f >= bound:
                            g = (label - np.float32(1.0)) * lr
                        elif f <= -bound:
                            g = label * lr
                        else:
                            g = (label - sigmoid[int((f + bound) * scale)]) * lr
                        for j in range(d):
                            bj = b[j]
                            grad[j] += g * bj
                            b[j] = bj + g * a[j]
                    if pull > 0.0:
                        m = means[assign[ctx]]
                        step = np.float32(lr * pull)
                        for j in range(d):
                            grad[j] -= step * (a[j] - m[j])
                    for j in range(d):
                        a[j] += grad[j]


def _negative_table(corpus: WalkCorpus, size_per_node: int = 100) -> np.ndarray:
    """Lookup table realising the unigram^0.75 distribution over nodes."""
    counts = np.bincount(corpus.steps[corpus.steps >= 0], minlength=len(corpus.node_ids)).astype(float)
    p = counts**0.75
    p /= p.sum()
    size = max(size_per_node * len(p), 1000)
    reps = np.floor(p * size).astype(np.int64)
    # distribute the rounding remainder to the largest fractional parts
    short = size - reps.sum()
    if short > 0:
        reps[np.argsort(-(p * size - reps), kind="stable")[:short]] += 1
    return np.repeat(np.arange(len(p), dtype=np.int64), reps)


def _run_sgns(corpus, syn0, syn1, window, negatives, lr, epochs, seed, pull=0.0, means=None, assign=None):
    """Train float32 vectors ``syn0``/``syn1`` in place."""
    if means is None:
        means = np.zeros((1, syn0.shape[1]))
        assign = np.zeros(len(syn0), dtype=np.int64)
    _sgns_kernel(
        corpus.steps, corpus.lengths, syn0, syn1, _negative_table(corpus), _SIGMOID_TABLE,
        int(window), int(negatives), float(lr), float(lr) / 10.0, int(epochs),
        int(seed % (2**48)), float(pull), np.ascontiguousarray(means, dtype=np.float32),
        np.asarray(assign, dtype=np.int64),
    )


def _untrained(corpus: WalkCorpus) -> tuple:
    """Nodes that never take part in a (context, centre) pair."""
    in_pairs = np.zeros(len(corpus.node_ids), dtype=bool)
    multi = corpus.lengths >= 2
    in_pairs[corpus.steps[multi][corpus.steps[multi] >= 0]] = True
    return tuple(corpus.node_ids[~in_pairs].tolist())


def train_node_embeddings(
    corpus: WalkCorpus, dim: int = 128, negatives: int = 5, epochs: int = 1,
    lr: float = 0.025, seed: int = 0, window: int = 10, snapshot_index: int = 0,
) -> EmbeddingTable:
    """Skip-gram with negative sampling; learning rate decays linearly to ``lr / 10``.

    Nodes that never co-occur with another node keep their random start
    vector and are listed in ``EmbeddingTable.untrained``.
    """
    syn0, _ = _train_vectors(corpus, dim, negatives, epochs, lr, seed, window)
    return EmbeddingTable(snapshot_index, corpus.node_ids, syn0.astype(float), _untrained(corpus))


def _train_vectors(corpus, dim, negatives, epochs, lr, seed, window):
    if len(corpus) == 0:
        raise ConfigError("empty walk corpus")
    if dim < 2:
        raise ConfigError(f"embedding dimension must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    n = len(corpus.node_ids)
    syn0 = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    syn1 = np.zeros((n, dim), dtype=np.float32)
    _run_sgns(corpus, syn0, syn1, window, negatives, lr, epochs, int(rng.integers(2**32)))
    return syn0, syn1


# --- Gaussian mixture -------------------------------------------------------


@dataclass
class MixtureFit:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    labels: np.ndarray
    log_likelihood: list = field(default_factory=list)
    reseeded: int = 0
    score: float = float("-inf")  # log-likelihood of the returned parameters


def _kmeanspp(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[centers].copy()


def _log_joint(X, means, variances, weights):
    # (n, k) matrix of log w_c + log N(x | mu_c, diag var_c)
    inv = 1.0 / variances
    quad = (X**2) @ inv.T - 2.0 * X @ (means * inv).T + np.sum(means**2 * inv, axis=1)
    logdet = np.sum(np.log(2.0 * np.pi * variances), axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw - 0.5 * (quad + logdet)


def _logsumexp_rows(a):
    mx = a.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(a - mx).sum(axis=1, keepdims=True)))[:, 0]


def _em(X, means, variances, weights, tol, max_iter, history):
    n = len(X)
    prev = None
    resp = None
    for _ in range(max_iter):
        lj = _log_joint(X, means, variances, weights)
        lse = _logsumexp_rows(lj)
        ll = float(lse.sum())
        history.append(ll)
        resp = np.exp(lj - lse[:, None])
        if prev is not None and abs(ll - prev) < tol * abs(prev):
            break
        prev = ll
        nk = resp.sum(axis=0)
        alive = nk > 1e-10
        safe = np.where(alive, nk, 1.0)
        new_means = (resp.T @ X) / safe[:, None]
        new_vars = (resp.T @ X**2) / safe[:, None] - new_means**2
        means = np.where(alive[:, None], new_means, means)
        variances = np.where(alive[:, None], np.maximum(new_vars, VAR_FLOOR), variances)
        weights = nk / n
    else:
        lj = _log_joint(X, means, variances, weights)
        resp = np.exp(lj - _logsumexp_rows(lj)[:, None])
    return means, variances, weights, resp


def fit_mixture(X, k, seed=0, tol=1e-6, max_iter=200, init_means=None, max_reseeds=10, n_init=1) -> MixtureFit:
    """Diagonal-covariance Gaussian mixture fitted by EM.

    Empty hard clusters are re-seeded at the point farthest from its own
    component mean, EM is resumed, and as a last resort points are moved
    directly so that every component owns at least one point. With
    ``n_init > 1`` (and no ``init_means``) the fit is restarted from fresh
    k-means++ seeds and the one with the highest log-likelihood is kept.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of points {n}")
    if n_init < 1:
        raise ConfigError(f"n_init must be >= 1, got {n_init}")
    if init_means is not None or n_init == 1:
        return _fit_once(X, k, np.random.default_rng(seed), tol, max_iter, init_means, max_reseeds)
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        fit = _fit_once(X, k, np.random.default_rng(child), tol, max_iter, None, max_reseeds)
        if best is None or fit.score > best.score:
            best = fit
    return best


def _fit_once(X, k, rng, tol, max_iter, init_means, max_reseeds) -> MixtureFit:
    n = len(X)
    means = _kmeanspp(X, k, rng) if init_means is None else np.array(init_means, dtype=float)
    global_var = np.maximum(X.var(axis=0), VAR_FLOOR)
    variances = np.tile(global_var, (k, 1))
    weights = np.full(k, 1.0 / k)
    history: list = []
    means, variances, weights, resp = _em(X, means, variances, weights, tol, max_iter, history)
    labels = resp.argmax(axis=1)
    reseeded = 0
    for _ in range(max_reseeds):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if len(empty) == 0:
            break
        for c in empty:
            far = _farthest_point(X, means, labels, counts)
            counts[labels[far]] -= 1
            labels[far] = c
            counts[c] += 1
            means[c] = X[far]
            variances[c] = global_var
            weights[c] = 1.0 / n
            reseeded += 1
        weights = weights / weights.sum()
        means, variances, weights, resp = _em(X, means, variances, weights, tol, max_iter, [])
        labels = resp.argmax(axis=1)
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        far = _farthest_point(X, means, labels, counts)
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] += 1
    weights = weights / weights.sum()
    score = float(_logsumexp_rows(_log_joint(X, means, variances, weights)).sum())
    return MixtureFit(means, variances, weights, labels, history, reseeded, score)


def _farthest_point(X, means, labels, counts):
    d2 = np.sum((X - means[labels]) ** 2, axis=1)
    d2[counts[labels] < 2] = -1.0
    return int(np.argmax(d2))


def _to_outputs(emb: EmbeddingTable, fit: MixtureFit):
    gaussians = [
        CommunityGaussian(c, fit.means[c].copy(), fit.variances[c].copy(), float(fit.weights[c]))
        for c in range(len(fit.weights))
    ]
    assignment = dict(zip(emb.node_ids.tolist(), fit.labels.tolist()))
    return gaussians, Clustering(emb.snapshot_index, assignment)


def fit_community_gaussians(emb: EmbeddingTable, k: int, seed: int = 0, init_means=None):
    """Fit ``k`` community Gaussians; returns ``(gaussians, clustering)``.

    Cluster ids are the mixture component indices.
    """
    fit = fit_mixture(emb.vectors, k, seed=seed, init_means=init_means)
    return _to_outputs(emb, fit)


def stage_seeds(seed: int) -> tuple:
    """Seeds of the walk, skip-gram, mixture and refinement stages."""
    return tuple(int(x) for x in np.random.SeedSequence(seed).generate_state(4))


def come_lite(s: Snapshot, k: int, params: EmbeddingParams = EmbeddingParams(), seed: int = 0):
    """Embeddings, clustering and community Gaussians of one snapshot.

    Returns ``(EmbeddingTable, Clustering, list[CommunityGaussian])``.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > len(s):
        raise ConfigError(f"k={k} exceeds the {len(s)} nodes of snapshot {s.index}")
    walk_seed, train_seed, gmm_seed, refine_seed = stage_seeds(seed)
    corpus = random_walks(s, params.walks_per_node, params.walk_length, walk_seed)
    syn0, syn1 = _train_vectors(
        corpus, params.dim, params.negatives, params.epochs, params.lr, train_seed, params.window
    )
    untrained = _untrained(corpus)
    fit = fit_mixture(syn0, k, seed=gmm_seed, n_init=params.gmm_restarts)

    round_seeds = np.random.SeedSequence(refine_seed).generate_state(max(params.refine_rounds, 1))
    for r in range(params.refine_rounds):
        _run_sgns(
            corpus, syn0, syn1, params.window, params.negatives, params.lr, params.epochs,
            int(round_seeds[r]), params.pull, fit.means, fit.labels,
        )
        fit = fit_mixture(syn0, k, seed=gmm_seed, init_means=fit.means)
    emb = EmbeddingTable(s.index, corpus.node_ids, syn0.astype(float), untrained)
    gaussians, clustering = _to_outputs(emb, fit)
    return emb, clustering, gaussians


def write_embeddings(emb: EmbeddingTable, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for v, vec in zip(emb.node_ids.tolist(), emb.vectors):
            fh.write(f"{v} " + " ".join(repr(float(x)) for x in vec) + "\n")


def read_embeddings(path, snapshot_index=0) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise ParseError("expected header 'n d'", 1)
        n, d = int(head[0]), int(head[1])
        ids, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            tok = line.split()
            if not tok:
                continue
            if len(tok) != d + 1:
                raise ParseError(f"expected {d + 1} fields, got {len(tok)}", lineno)
            ids.append(int(tok[0]))
            rows.append([float(x) for x in tok[1:]])
    if len(ids) != n:
        raise ParseError(f"header announces {n} vectors, found {len(ids)}")
    order = np.argsort(ids, kind="stable")
    return EmbeddingTable(snapshot_index, np.asarray(ids, dtype=np.int64)[order], np.asarray(rows).reshape(n, d)[order])


def write_communities(gaussians, path):
    with open(path, "w", encoding="utf-8") as fh:
        d = len(gaussians[0].mean) if gaussians else 0
        fh.write(f"# {len(gaussians)} {d}\n")
        for g in gaussians:
            vals = [repr(float(x)) for x in (*g.mean, *g.covariance)]
            fh.write(f"{g.cluster_id} {g.weight!r} " + " ".join(vals) + "\n")


def read_communities(path) -> list[CommunityGaussian]:
    out = []
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()[1:].split()
        d = int(head[1])
        for lineno, line in enumerate(fh, start=2):
            tok = line.split()
            if not tok:
                continue
            if len(tok) != 2 + 2 * d:
                raise ParseError(f"expected {2 + 2 * d} fields, got {len(tok)}", lineno)
            vals = np.array([float(x) for x in tok[2:]])
            out.append(CommunityGaussian(int(tok[0]), vals[:d], vals[d:], float(tok[1])))
    return out
