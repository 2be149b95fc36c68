"""Per-snapshot node feature matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError

FAMILIES = ("classic", "come", "all")
LEVELS = ("in", "out", "all")


@dataclass(frozen=True, eq=False)
class FeatureFrame:
    """Feature rows for every node of one snapshot, rows sorted by node id.

    ``flags`` holds per-node boolean diagnostics that are written alongside
    the features but never fed to a classifier.
    """

    snapshot_index: int
    node_ids: np.ndarray
    columns: tuple
    values: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.node_ids), len(self.columns)):
            raise DataError(
                f"feature frame {self.snapshot_index}: values shape {self.values.shape} "
                f"does not match {len(self.node_ids)} nodes x {len(self.columns)} columns"
            )

    def row_of(self) -> dict:
        return {int(v): i for i, v in enumerate(self.node_ids)}

    def row(self, v) -> dict:
        i = self.row_of()[v]
        return dict(zip(self.columns, self.values[i].tolist()))

    def select(self, family: str = "all", level: str = "all") -> "FeatureFrame":
        cols = select_columns(self.columns, family, level)
        idx = [self.columns.index(c) for c in cols]
        return FeatureFrame(self.snapshot_index, self.node_ids, tuple(cols), self.values[:, idx], self.flags)


def select_columns(columns, family="all", level="all") -> list:
    """Columns named ``{family}.{level}.{measure}`` matching the selection."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown feature family {family!r}; expected one of {FAMILIES}")
    if level not in LEVELS:
        raise ConfigError(f"unknown feature level {level!r}; expected one of {LEVELS}")
    fams = ("classic", "come") if family == "all" else (family,)
    levels = ("in", "out") if level == "all" else (level,)
    return [c for c in columns if c.split(".")[0] in fams and c.split(".")[1] in levels]


def concat_frames(*frames: FeatureFrame) -> FeatureFrame:
    first = frames[0]
    for f in frames[1:]:
        if f.snapshot_index != first.snapshot_index or not np.array_equal(f.node_ids, first.node_ids):
            raise DataError("cannot concatenate feature frames over different node sets")
    flags = {}
    for f in frames:
        flags.update(f.flags)
    return FeatureFrame(
        first.snapshot_index,
        first.node_ids,
        tuple(c for f in frames for c in f.columns),
        np.hstack([f.values for f in frames]),
        flags,
    )


def write_frame(frame: FeatureFrame, path):
    flag_names = sorted(frame.flags)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "snapshot", *frame.columns, *flag_names])
        for i, v in enumerate(frame.node_ids.tolist()):
            w.writerow(
                [v, frame.snapshot_index]
                + [repr(float(x)) for x in frame.values[i]]
                + [int(frame.flags[name][i]) for name in flag_names]
            )


def read_frame(path) -> FeatureFrame:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["node_id", "snapshot"]:
        raise DataError(f"{path}: not a feature matrix file")
    header = rows[0][2:]
    feat_idx = [i for i, c in enumerate(header) if c.count(".") >= 2]
    flag_idx = [i for i, c in enumerate(header) if c.count(".") < 2]
    body = rows[1:]
    index = int(body[0][1]) if body else 0
    node_ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    values = np.array([[float(r[2 + i]) for i in feat_idx] for r in body], dtype=float).reshape(len(body), len(feat_idx))
    flags = {header[i]: np.array([r[2 + i] == "1" for r in body], dtype=bool) for i in flag_idx}
    return FeatureFrame(index, node_ids, tuple(header[i] for i in feat_idx), values, flags)
