"""Random forest of Gini CART trees, stratified k-fold CV and per-class metrics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .errors import ConfigError, DataError, StratificationError


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: str | int = "sqrt"
    bootstrap: bool = True

    def n_split_features(self, width: int) -> int:
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(width)))
        if self.max_features in ("all", None):
            return width
        m = int(self.max_features)
        if not 1 <= m <= width:
            raise ConfigError(f"max_features={m} outside [1, {width}]")
        return m


class Tree(NamedTuple):
    """Flat tree; ``feature == -1`` marks a leaf. ``value`` holds the
    (bootstrap-weighted) class counts of the training samples at each node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@numba.njit(cache=True)
def _build_tree(X, y, w, n_classes, mtry, max_depth, min_split, seed):
    np.random.seed(seed)
    n, p = X.shape
    idx = np.flatnonzero(w > 0)
    m = idx.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node[0], st_lo[0], st_hi[0], st_depth[0] = 0, 0, m, 0
    top = 1
    n_nodes = 1
    feats = np.arange(p)
    vals = np.empty(m)
    lc = np.zeros(n_classes)
    while top > 0:
        top -= 1
        node, lo, hi, depth = st_node[top], st_lo[top], st_hi[top], st_depth[top]
        total = 0.0
        for i in range(lo, hi):
            value[node, y[idx[i]]] += w[idx[i]]
            total += w[idx[i]]
        pure = False
        for c in range(n_classes):
            if value[node, c] == total:
                pure = True
        if pure or total < min_split or (max_depth >= 0 and depth >= max_depth):
            continue
        parent_sq = 0.0
        for c in range(n_classes):
            parent_sq += value[node, c] ** 2
        best_imp = total - parent_sq / total
        best_f = -1
        best_thr = 0.0
        visited = 0
        # partial Fisher-Yates: draw features until mtry non-constant ones were scanned
        for j in range(p):
            r = j + np.random.randint(0, p - j)
            feats[j], feats[r] = feats[r], feats[j]
            f = feats[j]
            cnt = hi - lo
            for i in range(cnt):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals[:cnt], kind="mergesort")
            if vals[order[0]] == vals[order[cnt - 1]]:
                continue
            visited += 1
            for c in range(n_classes):
                lc[c] = 0.0
            nl = 0.0
            for i in range(cnt - 1):
                s = idx[lo + order[i]]
                lc[y[s]] += w[s]
                nl += w[s]
                a, b = vals[order[i]], vals[order[i + 1]]
                if a == b:
                    continue
                nr = total - nl
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lc[c] ** 2
                    sr += (value[node, c] - lc[c]) ** 2
                imp = (nl - sl / nl) + (nr - sr / nr)
                if imp < best_imp - 1e-12 or best_f < 0:
                    best_imp = imp
                    best_f = f
                    thr = 0.5 * (a + b)
                    if thr >= b:
                        thr = a
                    best_thr = thr
            if visited >= mtry:
                break
        if best_f < 0:
            continue
        # partition idx[lo:hi] on x <= thr
        i, j = lo, hi - 1
        while i <= j:
            if X[idx[i], best_f] <= best_thr:
                i += 1
            else:
                idx[i], idx[j] = idx[j], idx[i]
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = n_nodes + 1, i, hi, depth + 1
        top += 1
        st_node[top], st_lo[top], st_hi[top], st_depth[top] = n_nodes, lo, i, depth + 1
        top += 1
        n_nodes += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@numba.njit(cache=True)
def _tree_predict(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = np.argmax(value[node])
    return out


@dataclass(eq=False)
class Forest:
    classes: tuple
    n_features: int
    trees: list
    params: ForestParams
    seed: int

    def validate(self):
        for t in self.trees:
            internal = t.feature >= 0
            if np.any(t.feature[internal] >= self.n_features):
                raise DataError("tree splits on a feature beyond the dataset width")

    def tree_votes(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([_tree_predict(*t, X) for t in self.trees], axis=1)

    def _check(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"row width {X.shape[1]} does not match forest width {self.n_features}")
        return X

    def predict_scores(self, X) -> np.ndarray:
        votes = self.tree_votes(X)
        counts = np.zeros((len(votes), len(self.classes)))
        for c in range(len(self.classes)):
            counts[:, c] = (votes == c).sum(axis=1)
        return counts / len(self.trees)

    def predict(self, X) -> np.ndarray:
        # argmax picks the first maximum: classes are sorted, so ties go to
        # the lexicographically smallest label
        return np.asarray(self.classes, dtype=object)[self.predict_scores(X).argmax(axis=1)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": list(self.classes),
                "n_features": self.n_features,
                "params": asdict(self.params),
                "seed": self.seed,
                "trees": [{k: getattr(t, k).tolist() for k in Tree._fields} for t in self.trees],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        d = json.loads(text)
        trees = [
            Tree(
                np.asarray(t["feature"], dtype=np.int64), np.asarray(t["threshold"], dtype=float),
                np.asarray(t["left"], dtype=np.int64), np.asarray(t["right"], dtype=np.int64),
                np.asarray(t["value"], dtype=float).reshape(len(t["feature"]), len(d["classes"])),
            )
            for t in d["trees"]
        ]
        return cls(tuple(d["classes"]), d["n_features"], trees, ForestParams(**d["params"]), d["seed"])


def train_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> Forest:
    """Bagged CART trees; each split scans ``ceil(sqrt(width))`` random features."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=object)
    if len(y) == 0:
        raise DataError("cannot train on an empty dataset")
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise DataError("training data contains missing or non-finite values")
    classes = tuple(sorted(set(y.tolist())))
    codes = np.searchsorted(np.asarray(classes, dtype=object), y).astype(np.int64)
    n, p = X.shape
    mtry = params.n_split_features(p)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    states = np.random.SeedSequence(seed).generate_state(2 * params.n_trees, dtype=np.uint32)
    trees = []
    for t in range(params.n_trees):
        if params.bootstrap:
            rng = np.random.default_rng(int(states[2 * t]))
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        else:
            w = np.ones(n)
        parts = _build_tree(X, codes, w, len(classes), mtry, max_depth, params.min_samples_split, int(states[2 * t + 1]))
        trees.append(Tree(*parts))
    return Forest(classes, p, trees, params, seed)


def predict(forest: Forest, row):
    """Majority-vote label and per-class vote fractions for one row."""
    scores = forest.predict_scores(row)[0]
    label = forest.classes[int(np.argmax(scores))]
    return label, dict(zip(forest.classes, scores.tolist()))


def stratified_folds(targets, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Shuffle each class, then deal its members round-robin over the folds.

    Dealing continues where the previous class stopped, so fold sizes also
    differ by at most one overall.
    """
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    targets = np.asarray(targets, dtype=object)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    classes = sorted(set(targets.tolist()))
    for c in classes:
        members = np.flatnonzero(targets == c)
        if len(members) < k:
            raise StratificationError(c, len(members), k)
    start = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(targets == c))
        for j, i in enumerate(members.tolist()):
            folds[(start + j) % k].append(i)
        start = (start + len(members)) % k
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


@dataclass
class Metrics:
    classes: tuple
    precision: dict
    recall: dict
    f1: dict
    support: dict
    accuracy: float
    macro_f1: float
    extra: dict = field(default_factory=dict)

    def per_class(self) -> dict:
        return {c: {"P": self.precision[c], "R": self.recall[c], "F1": self.f1[c]} for c in self.classes}


def evaluate(preds, truth, classes: Sequence | None = None) -> Metrics:
    """One-vs-rest precision/recall/F1 per class, accuracy and macro-F1.

    A zero denominator yields 0 for that precision or recall.
    """
    preds = np.asarray(preds, dtype=object)
    truth = np.asarray(truth, dtype=object)
    if len(preds) != len(truth):
        raise DataError(f"{len(preds)} predictions for {len(truth)} labels")
    if len(truth) == 0:
        raise DataError("cannot evaluate an empty label set")
    if classes is None:
        classes = sorted(set(truth.tolist()) | set(preds.tolist()))
    P, R, F, S = {}, {}, {}, {}
    for c in classes:
        tp = int(np.sum((preds == c) & (truth == c)))
        fp = int(np.sum((preds == c) & (truth != c)))
        fn = int(np.sum((preds != c) & (truth == c)))
        P[c] = tp / (tp + fp) if tp + fp else 0.0
        R[c] = tp / (tp + fn) if tp + fn else 0.0
        F[c] = 2 * P[c] * R[c] / (P[c] + R[c]) if P[c] + R[c] else 0.0
        S[c] = tp + fn
    acc = float(np.mean(preds == truth))
    return Metrics(tuple(classes), P, R, F, S, acc, float(np.mean([F[c] for c in classes])))


def cross_validate(X, y, k: int = 5, params: ForestParams = ForestParams(), seed: int = 0):
    """Out-of-fold predictions pooled over ``k`` stratified folds, then scored once.

    Returns ``(predictions, Metrics)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=object)
    if len(set(y.tolist())) < 2:
        raise DataError("cross-validation needs at least two classes")
    fold_seed, forest_seed = np.random.SeedSequence(seed).generate_state(2)
    folds = stratified_folds(y, k, int(fold_seed))
    preds = np.empty(len(y), dtype=object)
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(len(y)), test)
        forest = train_forest(X[train], y[train], params, seed=int(forest_seed) + i)
        preds[test] = forest.predict(X[test])
    return preds, evaluate(preds, y, classes=sorted(set(y.tolist())))
