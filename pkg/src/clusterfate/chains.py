"""Historical chains: per-frame features of a node over a window, interleaved
with the labels observed between frames, and the label to predict next."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureFrame
from .tracking import NodeLabel, State, labels_by_transition, project_state

INTERMEDIATE = (State.STAY, State.MOVE)


@dataclass(frozen=True, eq=False)
class ChainDataset:
    chain_length: int
    variant: str
    frame_columns: tuple
    columns: tuple
    node_ids: np.ndarray
    window_ends: np.ndarray
    X: np.ndarray
    y: np.ndarray
    feature_set: tuple = ("all", "all")

    def __len__(self):
        return len(self.y)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def equals(self, other: "ChainDataset") -> bool:
        return (
            self.chain_length == other.chain_length
            and self.columns == other.columns
            and np.array_equal(self.node_ids, other.node_ids)
            and np.array_equal(self.window_ends, other.window_ends)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def class_counts(self) -> dict:
        vals, counts = np.unique(self.y, return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))


def chain_columns(frame_columns: Sequence[str], L: int) -> tuple:
    cols = []
    for offset in range(L - 1, -1, -1):
        cols.extend(f"t-{offset}.{c}" for c in frame_columns)
        if offset > 0:
            cols.extend(f"t-{offset - 1}.label.{s.value}" for s in INTERMEDIATE)
    return tuple(cols)


def admissible_ends(frame_ids: Iterable[int], label_ids: Iterable[int], L: int) -> list[int]:
    frames, labels = set(frame_ids), set(label_ids)
    return sorted(
        t for t in frames
        if t in labels and all(t - o in frames for o in range(L)) and all(t - o in labels for o in range(1, L))
    )


def build_dataset(
    frames: Sequence[FeatureFrame] | Mapping[int, FeatureFrame],
    labels: Sequence[NodeLabel] | Mapping[int, Mapping[int, State]],
    L: int,
    variant: str = "SMD",
    ends: Iterable[int] | None = None,
) -> ChainDataset:
    """One instance per (node, window end ``t``) with the node present in all
    frames ``t-L+1 .. t``; the target is its projected label for ``t -> t+1``.

    ``labels`` maps a snapshot index ``i`` to the SMD states of the transition
    ``i -> i+1``. Windows slide with stride one over ``ends`` (default: every
    admissible end).
    """
    if L < 2:
        raise ConfigError(f"chain length must be >= 2, got {L}")
    if not isinstance(frames, Mapping):
        frames = {f.snapshot_index: f for f in frames}
    if not isinstance(labels, Mapping):
        labels = labels_by_transition(labels)
    project_state(State.STAY, variant)  # validates the variant name

    valid = admissible_ends(frames, labels, L)
    if ends is None:
        ends = valid
    else:
        ends = sorted(set(ends))
        bad = [t for t in ends if t not in valid]
        if bad:
            raise ConfigError(f"window ends {bad} have no complete chain of length {L}")
    if not ends:
        raise ConfigError(
            f"chain length {L} needs {L} consecutive feature frames plus the following transition; "
            f"available frames: {sorted(frames)}"
        )
    frame_columns = frames[ends[0]].columns
    for f in frames.values():
        if f.columns != frame_columns:
            raise DataError("feature frames carry different columns")
    k = len(frame_columns)
    width = L * k + (L - 1) * len(INTERMEDIATE)

    rows, nodes, end_col, targets = [], [], [], []
    for t in ends:
        window = [frames[t - o] for o in range(L - 1, -1, -1)]
        lookups = [f.row_of() for f in window]
        present = set(lookups[0])
        for lk in lookups[1:]:
            present &= set(lk)
        trans = [labels[t - o] for o in range(L - 1, 0, -1)]
        for v in sorted(present):
            target = project_state(labels[t][v], variant)
            if target is None:
                continue
            row = np.empty(width)
            pos = 0
            for j, (f, lk) in enumerate(zip(window, lookups)):
                row[pos:pos + k] = f.values[lk[v]]
                pos += k
                if j < L - 1:
                    state = trans[j][v]
                    if state not in INTERMEDIATE:
                        raise DataError(f"node {v} present in frame {t - L + 2 + j} but labelled {state.value}")
                    row[pos:pos + 2] = [state == State.STAY, state == State.MOVE]
                    pos += 2
            rows.append(row)
            nodes.append(v)
            end_col.append(t)
            targets.append(target.value)
    X = np.vstack(rows) if rows else np.zeros((0, width))
    return ChainDataset(
        L, variant, tuple(frame_columns), chain_columns(frame_columns, L),
        np.asarray(nodes, dtype=np.int64), np.asarray(end_col, dtype=np.int64), X,
        np.asarray(targets, dtype=object),
    )


def write_dataset(ds: ChainDataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# chain_length={ds.chain_length} variant={ds.variant}\n")
        w = csv.writer(fh)
        w.writerow(["node_id", "window_end", *ds.columns, "target"])
        for v, t, row, y in zip(ds.node_ids.tolist(), ds.window_ends.tolist(), ds.X, ds.y):
            w.writerow([v, t, *(repr(float(x)) for x in row), y])


def read_dataset(path) -> ChainDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        meta = dict(kv.split("=") for kv in fh.readline()[1:].split())
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[:2] != ["node_id", "window_end"] or header[-1] != "target":
        raise DataError(f"{path}: not a chain dataset file")
    columns = tuple(header[2:-1])
    L = int(meta["chain_length"])
    body = rows[1:]
    frame_columns = tuple(c.split(".", 1)[1] for c in columns if c.startswith(f"t-{L - 1}.") and ".label." not in c)
    X = np.array([[float(x) for x in r[2:-1]] for r in body]).reshape(len(body), len(columns))
    return ChainDataset(
        L, meta["variant"], frame_columns, columns,
        np.array([int(r[0]) for r in body], dtype=np.int64),
        np.array([int(r[1]) for r in body], dtype=np.int64),
        X, np.array([r[-1] for r in body], dtype=object),
    )
