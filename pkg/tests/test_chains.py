import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterfate.chains import build_dataset, chain_columns, read_dataset, write_dataset
from clusterfate.errors import ConfigError
from clusterfate.features import FeatureFrame
from clusterfate.tracking import State


def toy(n_frames=6, n_nodes=12, k=3, seed=0, p_drop=0.15):
    """Frames and SMD labels for a population with churn; nodes drop for good."""
    rng = np.random.default_rng(seed)
    alive = set(range(n_nodes))
    frames, labels = {}, {}
    next_id = n_nodes
    for t in range(n_frames):
        ids = np.array(sorted(alive), dtype=np.int64)
        cols = tuple(f"classic.in.f{j}" for j in range(k))
        frames[t] = FeatureFrame(t, ids, cols, rng.normal(size=(len(ids), k)) + t)
        if t == n_frames - 1:
            break
        lab = {}
        for v in ids.tolist():
            r = rng.random()
            lab[v] = State.DROP if r < p_drop else (State.MOVE if r < 0.5 else State.STAY)
        labels[t] = lab
        alive = {v for v in alive if lab[v] != State.DROP}
        alive.add(next_id)
        next_id += 1
    return frames, labels


def test_width_for_sixteen_features():
    frames, labels = toy(k=16)
    ds = build_dataset(frames, labels, 2, "SM")
    assert ds.width == 34 == len(ds.columns)


def test_column_layout():
    cols = chain_columns(("a.in.x", "a.out.y"), 3)
    assert cols == (
        "t-2.a.in.x", "t-2.a.out.y", "t-1.label.stay", "t-1.label.move",
        "t-1.a.in.x", "t-1.a.out.y", "t-0.label.stay", "t-0.label.move",
        "t-0.a.in.x", "t-0.a.out.y",
    )


def test_row_content_and_target():
    frames, labels = toy()
    ds = build_dataset(frames, labels, 3, "SMD")
    i = 0
    v, t = int(ds.node_ids[i]), int(ds.window_ends[i])
    row = ds.X[i]
    assert np.array_equal(row[:3], frames[t - 2].values[frames[t - 2].row_of()[v]])
    assert row[3:5].tolist() == [labels[t - 2][v] == State.STAY, labels[t - 2][v] == State.MOVE]
    assert np.array_equal(row[-3:], frames[t].values[frames[t].row_of()[v]])
    assert ds.y[i] == labels[t][v].value


def test_absent_node_yields_no_instance():
    frames, labels = toy()
    # node 0 exists in frame 0 but is removed from frame 1
    f1 = frames[1]
    keep = f1.node_ids != 0
    frames[1] = FeatureFrame(1, f1.node_ids[keep], f1.columns, f1.values[keep])
    labels[0][0] = State.DROP
    ds = build_dataset(frames, labels, 2, "SMD", ends=[1])
    assert 0 not in ds.node_ids.tolist()


def test_variants():
    frames, labels = toy(n_nodes=40)
    smd = build_dataset(frames, labels, 2, "SMD")
    sl = build_dataset(frames, labels, 2, "SL")
    sm = build_dataset(frames, labels, 2, "SM")
    assert set(sl.y.tolist()) <= {"stay", "leave"}
    assert "drop" not in set(sm.y.tolist())
    assert len(sm) == len(smd) - int(np.sum(smd.y == "drop"))
    assert np.array_equal(sl.X, smd.X)


def test_too_long_chain_is_a_config_error():
    frames, labels = toy(n_frames=4)
    with pytest.raises(ConfigError):
        build_dataset(frames, labels, 4, "SMD")
    with pytest.raises(ConfigError):
        build_dataset(frames, labels, 1, "SMD")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_instance_count_non_increasing_in_length(seed):
    frames, labels = toy(n_frames=8, n_nodes=20, seed=seed)
    counts = [len(build_dataset(frames, labels, L, "SMD")) for L in range(2, 8)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_target_never_leaks_into_features(seed):
    frames, labels = toy(n_frames=7, seed=seed)
    ds = build_dataset(frames, labels, 3, "SMD")
    for i in range(len(ds)):
        v, t = int(ds.node_ids[i]), int(ds.window_ends[i])
        for o in range(3):
            assert v in frames[t - o].row_of()


def test_unused_snapshot_does_not_matter():
    frames, labels = toy(n_frames=7)
    full = build_dataset(frames, labels, 2, "SMD", ends=[3, 4])
    frames.pop(0)
    labels.pop(0)
    part = build_dataset(frames, labels, 2, "SMD", ends=[3, 4])
    assert full.equals(part)


def test_round_trip(tmp_path):
    frames, labels = toy()
    ds = build_dataset(frames, labels, 3, "SL")
    write_dataset(ds, tmp_path / "d.csv")
    back = read_dataset(tmp_path / "d.csv")
    assert back.equals(ds)
    assert back.variant == "SL" and back.frame_columns == ds.frame_columns
