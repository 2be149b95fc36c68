"""End-to-end experiments: configuration, pipeline, grids, sweeps and reports.

A run prepares the per-snapshot state once (snapshots, Louvain k, ComE-lite
embeddings, tracked labels, all feature columns) and then evaluates every
requested (problem, feature family, level, chain length) cell by stratified
cross-validation on the chains built from that state.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chains import build_dataset
from .communities import louvain, modularity
from .embeddings import EmbeddingParams, come_lite
from .errors import ClusterFateError, ConfigError, DataError
from .features import FAMILIES, LEVELS, concat_frames
from .features.classic import classic_feature_frame
from .features.embedding import METRICS, delta_values, embedding_feature_frame
from .forest import ForestParams, cross_validate
from .graph import filter_min_degree, read_edge_list, split_snapshots
from .syntgen import GenConfig, generate, to_edge_list
from .tracking import SIMILARITIES, VARIANTS, State, label_nodes, labels_by_transition, track

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

AXES = ("chain_length", "ratio", "feature_set")
SOURCES = ("generator", "edges")


@dataclass(frozen=True)
class DataConfig:
    source: str = "generator"
    path: str | None = None
    directed: bool = False
    snapshots: int = 10
    balance: str = "edges"
    dmin: int = 0
    name: str | None = None


@dataclass(frozen=True)
class FeatureConfig:
    families: tuple = ("all",)
    levels: tuple = ("all",)
    metric: str = "euclidean"
    clusters: str = "come"  # which clustering defines labels and "in" features
    similarity: str = "overlap"


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = DataConfig()
    generator: GenConfig = GenConfig()
    embedding: EmbeddingParams = EmbeddingParams()
    features: FeatureConfig = FeatureConfig()
    forest: ForestParams = ForestParams()
    variants: tuple = ("SMD", "SL", "SM")
    chain_lengths: tuple | None = None  # None: 5 for 10 snapshots, 2 for 5
    folds: int = 5
    seed: int = 0
    out_dir: str = "results"

    def resolved_chain_lengths(self) -> tuple:
        if self.chain_lengths is not None:
            return tuple(self.chain_lengths)
        return (max(2, self.data.snapshots // 2),)

    def dataset_name(self) -> str:
        if self.data.name:
            return self.data.name
        if self.data.source == "generator":
            return "synthetic"
        return Path(self.data.path).stem

    def validate(self):
        d = self.data
        if d.source not in SOURCES:
            raise ConfigError(f"data.source must be one of {SOURCES}, got {d.source!r}")
        if d.source == "edges":
            if not d.path:
                raise ConfigError("data.path is required for an edge-list source")
            if not Path(d.path).is_file():
                raise ConfigError(f"edge list {d.path} does not exist")
        if d.balance not in ("edges", "time"):
            raise ConfigError(f"data.balance must be 'edges' or 'time', got {d.balance!r}")
        if d.snapshots < 2:
            raise ConfigError("need at least 2 snapshots")
        if d.dmin < 0:
            raise ConfigError("data.dmin must be >= 0")
        f = self.features
        for fam in f.families:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown feature family {fam!r}; expected one of {FAMILIES}")
        for lvl in f.levels:
            if lvl not in LEVELS:
                raise ConfigError(f"unknown feature level {lvl!r}; expected one of {LEVELS}")
        if f.metric not in METRICS:
            raise ConfigError(f"unknown metric {f.metric!r}; expected one of {METRICS}")
        if f.clusters not in ("come", "louvain"):
            raise ConfigError(f"features.clusters must be 'come' or 'louvain', got {f.clusters!r}")
        if f.similarity not in SIMILARITIES:
            raise ConfigError(f"unknown similarity {f.similarity!r}; expected one of {SIMILARITIES}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown problem variant {v!r}; expected one of {VARIANTS}")
        for L in self.resolved_chain_lengths():
            if not 2 <= L <= d.snapshots - 1:
                raise ConfigError(f"chain length {L} needs 2 <= L <= snapshots - 1 = {d.snapshots - 1}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if d.source == "generator":
            self.generator.validate()
            if self.generator.n_snapshots != d.snapshots:
                raise ConfigError("generator.n_snapshots must equal data.snapshots")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "data": DataConfig,
    "generator": GenConfig,
    "embedding": EmbeddingParams,
    "features": FeatureConfig,
    "forest": ForestParams,
}


def _build(cls, table: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    return cls(**kw)


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    kw = {}
    for name, cls in _SECTIONS.items():
        if name in d:
            kw[name] = _build(cls, d.pop(name) or {}, name)
    top = {f.name for f in dataclasses.fields(ExperimentConfig)} - set(_SECTIONS)
    unknown = set(d) - top
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    for k, v in d.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    cfg = ExperimentConfig(**kw)
    if "generator" not in kw and cfg.data.snapshots != cfg.generator.n_snapshots:
        cfg = cfg.replace(generator=dataclasses.replace(cfg.generator, n_snapshots=cfg.data.snapshots))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = config_from_dict(raw)
    if cfg.data.path and not Path(cfg.data.path).is_absolute():
        # paths in a config file are relative to the file
        rel = str(Path(path).parent / cfg.data.path)
        cfg = cfg.replace(data=dataclasses.replace(cfg.data, path=rel))
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    d = cfg.to_dict()
    d.pop("out_dir")
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic sub-seed for one stage (and snapshot) of a run."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


class StageError(ClusterFateError):
    """A pipeline stage failed; ``partial`` lists what had completed."""

    def __init__(self, stage, cause, partial):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial


@dataclass
class Prepared:
    """Everything a grid cell needs, computed once per data/embedding setup."""

    snapshots: list
    louvain: list
    q: list
    clusterings: list
    embeddings: list
    gaussians: list
    lineage: list
    labels: dict  # snapshot i -> {node: State}
    frames: dict  # snapshot i -> FeatureFrame with every column
    timings: dict
    truth_labels: dict | None = None


_STAGE_IDS = {"generate": 1, "louvain": 2, "come": 3, "cv": 4}


class _Stages:
    def __init__(self):
        self.timings: dict = {}
        self.done: list = []

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except ClusterFateError as exc:
            raise StageError(name, exc, list(self.done)) from exc
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0
        if name not in self.done:
            self.done.append(name)
        return out


def _load_snapshots(cfg: ExperimentConfig, st: _Stages):
    d = cfg.data
    truth = None
    if d.source == "generator":
        gen = dataclasses.replace(cfg.generator, seed=derive_seed(cfg.seed, _STAGE_IDS["generate"]))
        snaps, gt = st.run("generate", generate, gen)
        truth = gt.labels
        tel = to_edge_list(snaps)
        # generator snapshots keep isolated nodes and need no re-splitting
        snapshots = st.run("snapshot", lambda: [filter_min_degree(s, d.dmin) for s in snaps])
    else:
        tel = st.run("ingest", read_edge_list, d.path, d.directed)
        snapshots = st.run(
            "snapshot", lambda: [filter_min_degree(s, d.dmin) for s in split_snapshots(tel, d.snapshots, d.balance)]
        )
    return snapshots, truth


def _louvain_stage(snapshots, seed):
    parts, qs = [], []
    for s in snapshots:
        c = louvain(s, derive_seed(seed, _STAGE_IDS["louvain"], s.index))
        parts.append(c)
        qs.append(modularity(s, c) if s.n_edges else float("nan"))
    return parts, qs


def _come_stage(snapshots, ks, params, seed):
    out = []
    for s, k in zip(snapshots, ks):
        out.append(come_lite(s, k, params, derive_seed(seed, _STAGE_IDS["come"], s.index)))
    return out


def _label_stage(snapshots, clusterings, similarity):
    maps = track(clusterings, similarity)
    labels = {}
    for i, lm in enumerate(maps):
        labs = label_nodes(snapshots[i], snapshots[i + 1], clusterings[i], clusterings[i + 1], lm)
        labels[snapshots[i].index] = {lab.node: lab.state for lab in labs}
    return maps, labels


def prepare(cfg: ExperimentConfig) -> Prepared:
    """Run every stage up to (and including) feature extraction."""
    cfg.validate()
    st = _Stages()
    snapshots, truth = _load_snapshots(cfg, st)
    for s in snapshots:
        if len(s) == 0:
            raise StageError("snapshot", DataError(f"snapshot {s.index} is empty"), list(st.done))
    parts, qs = st.run("louvain", _louvain_stage, snapshots, cfg.seed)
    come = st.run("embed", _come_stage, snapshots, [c.m for c in parts], cfg.embedding, cfg.seed)
    embeddings = [e for e, _, _ in come]
    gaussians = [g for _, _, g in come]
    clusterings = [c for _, c, _ in come] if cfg.features.clusters == "come" else parts
    maps, labels = st.run("track", _label_stage, snapshots, clusterings, cfg.features.similarity)

    classic = [st.run("features_classic", classic_feature_frame, s, c) for s, c in zip(snapshots, clusterings)]
    emb_frames = [
        st.run("features_embedding", embedding_feature_frame, e, c, g, cfg.features.metric)
        for e, c, g in zip(embeddings, clusterings, gaussians)
    ]
    frames = {s.index: concat_frames(a, b) for s, a, b in zip(snapshots, classic, emb_frames)}
    return Prepared(snapshots, parts, qs, clusterings, embeddings, gaussians, maps, labels, frames, st.timings, truth)


_CACHE: dict = {}


def _prep_key(cfg: ExperimentConfig) -> str:
    d = cfg.to_dict()
    for k in ("forest", "variants", "chain_lengths", "folds", "out_dir"):
        d.pop(k)
    d["features"] = {k: v for k, v in d["features"].items() if k not in ("families", "levels")}
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def prepare_cached(cfg: ExperimentConfig) -> Prepared:
    """``prepare`` memoised in-process on the settings that affect it."""
    key = _prep_key(cfg)
    if key not in _CACHE:
        _CACHE.clear()  # one prepared state at a time keeps memory flat
        _CACHE[key] = prepare(cfg)
    return _CACHE[key]


def _select_frames(prep: Prepared, family: str, level: str) -> dict:
    return {i: f.select(family, level) for i, f in prep.frames.items()}


def evaluate_cell(prep: Prepared, variant, family, level, L, cfg: ExperimentConfig) -> dict:
    """Cross-validated metrics of one grid cell, as a results record."""
    ds = build_dataset(_select_frames(prep, family, level), prep.labels, L, variant)
    preds, m = cross_validate(ds.X, ds.y, cfg.folds, cfg.forest, derive_seed(cfg.seed, _STAGE_IDS["cv"]))
    return {
        "problem": variant,
        "feature_set": f"{family}/{level}",
        "family": family,
        "level": level,
        "chain_length": L,
        "per_class": {c: {"P": m.precision[c], "R": m.recall[c], "F1": m.f1[c]} for c in m.classes},
        "support": {c: m.support[c] for c in m.classes},
        "accuracy": m.accuracy,
        "macro_f1": m.macro_f1,
        "n_instances": len(ds),
        "seed": cfg.seed,
        "status": "ok",
    }


def delta_summary(prep: Prepared) -> dict:
    """Median Delta of the nodes of every transition, grouped by their next state."""
    groups: dict = {s.value: [] for s in (State.STAY, State.MOVE, State.DROP)}
    for i, labs in prep.labels.items():
        f = prep.frames[i]
        if f.flags.get("degenerate_out", np.zeros(1, bool)).any():
            continue
        d = delta_values(f)
        for v, r in f.row_of().items():
            if v in labs:
                groups[labs[v].value].append(d[r])
    return {k: {"median": float(np.median(v)) if v else None, "n": len(v)} for k, v in groups.items()}


def snapshot_stats(prep: Prepared) -> list:
    return [
        {"snapshot": s.index, "nodes": len(s), "edges": s.n_edges, "clusters": c.m, "Q": q}
        for s, c, q in zip(prep.snapshots, prep.louvain, prep.q)
    ]


@dataclass
class ResultsReport:
    dataset: str
    cells: list
    provenance: dict
    timings: dict
    snapshots: list = field(default_factory=list)
    delta: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    sweep_axis: str | None = None

    def cell(self, problem, family="all", level="all", chain_length=None) -> dict:
        for c in self.cells:
            if (c["problem"], c["family"], c["level"]) == (problem, family, level) and (
                chain_length is None or c["chain_length"] == chain_length
            ):
                return c
        raise KeyError((problem, family, level, chain_length))

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultsReport":
        return cls(**json.loads(text))


def _versions() -> dict:
    import numba

    from . import __version__

    return {"clusterfate": __version__, "numpy": np.__version__, "numba": numba.__version__, "python": platform.python_version()}


def _grid(cfg: ExperimentConfig):
    for v in cfg.variants:
        for fam in cfg.features.families:
            for lvl in cfg.features.levels:
                for L in cfg.resolved_chain_lengths():
                    yield v, fam, lvl, L


def run_experiment(cfg: ExperimentConfig, prep: Prepared | None = None) -> ResultsReport:
    """Prepare (or reuse) the pipeline state and evaluate the whole grid.

    Cells that cannot be evaluated (too few instances of a class for the
    folds, no admissible window) are kept in the report with status
    ``failed`` and the reason.
    """
    cfg.validate()
    if prep is None:
        prep = prepare_cached(cfg)
    timings = dict(prep.timings)
    cells = []
    t0 = time.perf_counter()
    for v, fam, lvl, L in _grid(cfg):
        try:
            cells.append(evaluate_cell(prep, v, fam, lvl, L, cfg))
        except (ConfigError, DataError) as exc:
            cells.append({
                "problem": v, "feature_set": f"{fam}/{lvl}", "family": fam, "level": lvl,
                "chain_length": L, "seed": cfg.seed, "status": "failed", "error": str(exc),
            })
    timings["chains_cv"] = time.perf_counter() - t0
    provenance = {"config_hash": config_hash(cfg), "seed": cfg.seed, "versions": _versions(), "config": cfg.to_dict()}
    return ResultsReport(
        cfg.dataset_name(), cells, provenance, timings, snapshot_stats(prep), delta_summary(prep)
    )


def sweep(cfg: ExperimentConfig, axis: str, values) -> ResultsReport:
    """One experiment per axis value, all with the same seed.

    ``feature_set`` values are ``"family/level"`` strings. The long-format
    rows land in ``report.sweep``; the cells of every run are kept too.
    """
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if axis == "ratio" and cfg.data.source != "generator":
        raise ConfigError("the ratio axis only applies to generated data")
    rows, cells, timings = [], [], {}
    base = None
    for value in values:
        if axis == "chain_length":
            run_cfg = cfg.replace(chain_lengths=(int(value),))
        elif axis == "ratio":
            run_cfg = cfg.replace(generator=dataclasses.replace(cfg.generator, ratio=float(value)))
        else:
            try:
                fam, lvl = str(value).split("/")
            except ValueError:
                raise ConfigError(f"feature_set values look like 'family/level', got {value!r}") from None
            run_cfg = cfg.replace(features=dataclasses.replace(cfg.features, families=(fam,), levels=(lvl,)))
        rr = run_experiment(run_cfg)
        base = base or rr
        for k, t in rr.timings.items():
            timings[k] = timings.get(k, 0.0) + t
        for c in rr.cells:
            c = dict(c, sweep_value=value)
            cells.append(c)
            if c["status"] != "ok":
                continue
            for cls, pc in c["per_class"].items():
                rows.append({
                    "axis": axis, "value": value, "problem": c["problem"], "feature_set": c["feature_set"],
                    "class": cls, "f1": pc["F1"], "macro_f1": c["macro_f1"],
                })
    provenance = {"config_hash": config_hash(cfg), "seed": cfg.seed, "versions": _versions(), "config": cfg.to_dict()}
    return ResultsReport(
        cfg.dataset_name(), cells, provenance, timings,
        base.snapshots if base else [], base.delta if base else {}, rows, axis,
    )


def sweep_value(rr: ResultsReport, value, problem) -> float:
    """Macro-F1 of ``problem`` at one sweep value."""
    for r in rr.sweep:
        if r["value"] == value and r["problem"] == problem:
            return r["macro_f1"]
    raise KeyError((value, problem))


def _fmt(x) -> str:
    return "" if x is None else f"{x:.3f}"


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def emit_report(rr: ResultsReport, out_dir) -> list[Path]:
    """Write ``results.json`` plus the CSV tables; overwrites, byte-stable."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.json").write_text(rr.to_json(), encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    ok = [c for c in rr.cells if c["status"] == "ok"]

    metrics = []
    for c in ok:
        for cls, pc in c["per_class"].items():
            metrics.append([
                rr.dataset, c["problem"], c["family"], c["level"], c["chain_length"], cls,
                _fmt(pc["P"]), _fmt(pc["R"]), _fmt(pc["F1"]), c["support"][cls],
                _fmt(c["accuracy"]), _fmt(c["macro_f1"]), c["n_instances"],
            ])
    _write_csv(
        out / "metrics.csv",
        ["dataset", "problem", "family", "level", "chain_length", "class", "precision", "recall", "f1",
         "support", "accuracy", "macro_f1", "n_instances"],
        metrics,
    )
    fig2 = [
        [rr.dataset, c["problem"], cls, c["family"], _fmt(pc["F1"])]
        for c in ok if c["level"] == "all" for cls, pc in c["per_class"].items()
    ]
    _write_csv(out / "fig2_per_class.csv", ["dataset", "problem", "class", "family", "f1"], fig2)
    fig4 = [
        [rr.dataset, c["problem"], c["family"], c["level"], c["chain_length"], _fmt(c["macro_f1"])]
        for c in ok
    ]
    _write_csv(out / "fig4_feature_category.csv", ["dataset", "problem", "family", "level", "chain_length", "macro_f1"], fig4)
    fig5 = [
        [r["axis"], r["value"], r["problem"], r["feature_set"], r["class"], _fmt(r["f1"]), _fmt(r["macro_f1"])]
        for r in rr.sweep
    ]
    _write_csv(out / "fig5_sweep.csv", ["axis", "value", "problem", "feature_set", "class", "f1", "macro_f1"], fig5)
    snaps = [[s["snapshot"], s["nodes"], s["edges"], s["clusters"], _fmt(s["Q"])] for s in rr.snapshots]
    _write_csv(out / "snapshots.csv", ["snapshot", "nodes", "edges", "clusters", "Q"], snaps)
    failed = [[c["problem"], c["family"], c["level"], c["chain_length"], c.get("error", "")] for c in rr.cells if c["status"] != "ok"]
    _write_csv(out / "failed_cells.csv", ["problem", "family", "level", "chain_length", "error"], failed)
    return sorted(out.iterdir())
