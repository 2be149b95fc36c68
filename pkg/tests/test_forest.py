import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterfate.errors import DataError, StratificationError
from clusterfate.forest import (
    Forest,
    ForestParams,
    cross_validate,
    evaluate,
    predict,
    stratified_folds,
    train_forest,
)

FEW = ForestParams(n_trees=15)


def noisy_blobs(seed, n=120):
    rng = np.random.default_rng(seed)
    y = rng.choice(np.array(["a", "b", "c"], dtype=object), n)
    X = rng.normal(size=(n, 5))
    X[:, 0] += (y == "b") * 2.5
    X[:, 1] += (y == "c") * 2.5
    return X, y


def test_fold_sizes_for_imbalanced_labels():
    y = ["x"] * 90 + ["y"] * 10
    folds = stratified_folds(y, 5, seed=0)
    yy = np.array(y)
    for f in folds:
        assert (yy[f] == "x").sum() == 18 and (yy[f] == "y").sum() == 2
    assert sorted(np.concatenate(folds).tolist()) == list(range(100))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(5, 40), min_size=2, max_size=4), st.integers(2, 5), st.integers(0, 999))
def test_fold_balance_property(counts, k, seed):
    y = np.concatenate([[c] * n for c, n in enumerate(counts)])
    folds = stratified_folds(y, k, seed)
    assert sorted(np.concatenate(folds).tolist()) == list(range(len(y)))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    for c in range(len(counts)):
        per = [int(np.sum(y[f] == c)) for f in folds]
        assert max(per) - min(per) <= 1


def test_stratification_error():
    with pytest.raises(StratificationError):
        stratified_folds(["a"] * 10 + ["b"] * 3, 5)


def test_single_class_predicts_that_class():
    X = np.random.default_rng(0).normal(size=(10, 3))
    f = train_forest(X, ["stay"] * 10, FEW)
    assert set(f.predict(X).tolist()) == {"stay"}
    with pytest.raises(DataError):
        cross_validate(X, ["stay"] * 10)


def test_xor_is_learned():
    base = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    X = np.repeat(base, 25, axis=0)
    y = np.repeat(np.array(["0", "1", "1", "0"], dtype=object), 25)
    f = train_forest(X, y, ForestParams(n_trees=30, max_features="all"), seed=1)
    assert np.mean(f.predict(X) == y) == 1.0


def test_memorises_distinct_rows():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 4))
    y = rng.choice(np.array(["s", "m"], dtype=object), 20)
    f = train_forest(X, y, ForestParams(n_trees=1, bootstrap=False, max_features="all"))
    assert np.array_equal(f.predict(X), y)


def test_metrics_hand_example():
    truth = ["p"] * 4 + ["n"] * 4
    preds = ["p", "p", "p", "n"] + ["p", "n", "n", "n"]
    m = evaluate(preds, truth)
    assert m.precision["p"] == m.recall["p"] == m.f1["p"] == pytest.approx(0.75)
    assert m.accuracy == pytest.approx(0.75)
    assert m.macro_f1 == pytest.approx(0.75)
    assert m.support == {"n": 4, "p": 4}


def test_absent_class_scores_zero():
    m = evaluate(["a", "a"], ["a", "b"], classes=["a", "b", "c"])
    assert m.precision["c"] == m.recall["c"] == m.f1["c"] == 0.0


def test_determinism_and_seed_sensitivity():
    X, y = noisy_blobs(0)
    a = train_forest(X, y, FEW, seed=7)
    b = train_forest(X, y, FEW, seed=7)
    assert a.to_json() == b.to_json()
    p1, m1 = cross_validate(X, y, params=FEW, seed=2)
    p2, m2 = cross_validate(X, y, params=FEW, seed=2)
    assert np.array_equal(p1, p2) and m1 == m2
    assert a.to_json() != train_forest(X, y, FEW, seed=8).to_json()


def test_scores_sum_to_one_and_agree_with_predict():
    X, y = noisy_blobs(1)
    f = train_forest(X, y, FEW)
    s = f.predict_scores(X)
    assert np.allclose(s.sum(axis=1), 1.0)
    label, scores = predict(f, X[0])
    assert label == f.predict(X[:1])[0]
    assert sum(scores.values()) == pytest.approx(1.0)


def test_forest_at_least_as_good_as_worst_tree():
    X, y = noisy_blobs(2, 300)
    f = train_forest(X[:200], y[:200], ForestParams(n_trees=25), seed=0)
    acc = np.mean(f.predict(X[200:]) == y[200:])
    votes = f.tree_votes(X[200:])
    tree_acc = [np.mean(np.asarray(f.classes, dtype=object)[votes[:, t]] == y[200:]) for t in range(votes.shape[1])]
    assert acc >= min(tree_acc)


def test_row_permutation_changes_nothing_without_bootstrap():
    X, y = noisy_blobs(4, 60)
    p = ForestParams(n_trees=5, bootstrap=False)
    perm = np.random.default_rng(0).permutation(len(y))
    a = train_forest(X, y, p, seed=3).predict(X)
    b = train_forest(X[perm], y[perm], p, seed=3).predict(X)
    assert np.array_equal(a, b)


def test_width_mismatch_and_bad_data():
    X, y = noisy_blobs(5, 30)
    f = train_forest(X, y, FEW)
    with pytest.raises(DataError):
        f.predict(X[:, :3])
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(DataError):
        train_forest(bad, y, FEW)
    with pytest.raises(DataError):
        train_forest(np.zeros((0, 3)), [], FEW)


def test_json_round_trip():
    X, y = noisy_blobs(6, 50)
    f = train_forest(X, y, FEW, seed=1)
    g = Forest.from_json(f.to_json())
    assert np.array_equal(g.predict(X), f.predict(X))
    assert g.classes == f.classes and g.n_features == f.n_features


def test_cross_validation_beats_chance():
    X, y = noisy_blobs(7, 300)
    preds, m = cross_validate(X, y, params=ForestParams(n_trees=30), seed=0)
    assert len(preds) == len(y)
    assert m.macro_f1 > 0.6
