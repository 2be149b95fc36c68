"""Command line interface.

Stage commands share a work directory with a fixed layout::

    edges.txt                 canonical temporal edge list
    snapshots/snapshot_<i>.txt, snapshots/manifest.json
    louvain/clustering_<i>.txt
    come/embeddings_<i>.txt, come/communities_<i>.txt, come/clustering_<i>.txt
    labels.txt, lineage.txt
    features/features_<i>.csv
    chains_L<L>_<variant>.csv
    forest.json, metrics.json

``run`` and ``sweep`` execute the whole pipeline from a TOML config.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

from .embeddings import EmbeddingParams
from .errors import ClusterFateError, ConfigError, DataError

log = logging.getLogger("clusterfate")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


def _sorted_files(d: Path, prefix: str, suffix: str) -> list[Path]:
    files = list(d.glob(f"{prefix}*{suffix}"))
    if not files:
        raise DataError(f"no {prefix}*{suffix} files in {d}")
    return sorted(files, key=lambda p: int(p.name[len(prefix):-len(suffix)]))


def _read_snapshots(work: Path):
    from .graph import read_snapshot

    return [read_snapshot(p) for p in _sorted_files(work / "snapshots", "snapshot_", ".txt")]


def _read_clusterings(d: Path):
    from .communities import read_clustering

    return [read_clustering(p) for p in _sorted_files(d, "clustering_", ".txt")]


def cmd_generate(a):
    from .communities import write_clustering
    from .graph import write_edge_list
    from .syntgen import GenConfig, generate, to_edge_list
    from .tracking import write_labels

    cfg = GenConfig(
        n_nodes=a.nodes, n_clusters=a.clusters, n_snapshots=a.snapshots, ratio=a.ratio,
        p_drop=a.p_drop, p_move=a.p_move, seed=a.seed,
    )
    snaps, gt = generate(cfg)
    work = Path(a.work)
    (work / "truth").mkdir(parents=True, exist_ok=True)
    write_edge_list(to_edge_list(snaps), work / "edges.txt")
    for c in gt.clusterings:
        write_clustering(c, work / "truth" / f"clustering_{c.snapshot_index}.txt")
    write_labels(gt.all_labels(), work / "truth" / "labels.txt")
    print(f"generated {len(snaps)} snapshots into {work}")


def cmd_ingest(a):
    from .graph import read_edge_list, write_edge_list

    tel = read_edge_list(a.edges, directed=a.directed)
    Path(a.work).mkdir(parents=True, exist_ok=True)
    write_edge_list(tel, Path(a.work) / "edges.txt")
    print(f"{len(tel)} edges, timestamps spanning {tel.span}")


def cmd_snapshot(a):
    from .graph import filter_min_degree, read_edge_list, split_snapshots, write_manifest, write_snapshot

    work = Path(a.work)
    tel = read_edge_list(work / "edges.txt")
    snaps = [filter_min_degree(s, a.dmin) for s in split_snapshots(tel, a.T, a.balance)]
    out = work / "snapshots"
    out.mkdir(parents=True, exist_ok=True)
    for s in snaps:
        write_snapshot(s, out / f"snapshot_{s.index}.txt")
    write_manifest(snaps, out / "manifest.json")
    for s in snaps:
        print(f"snapshot {s.index}: {len(s)} nodes, {s.n_edges} edges")


def cmd_detect(a):
    from .communities import louvain, modularity, write_clustering
    from .experiment import derive_seed

    work = Path(a.work)
    out = work / "louvain"
    out.mkdir(parents=True, exist_ok=True)
    for s in _read_snapshots(work):
        c = louvain(s, derive_seed(a.seed, 2, s.index))
        q = modularity(s, c) if s.n_edges else None
        write_clustering(c, out / f"clustering_{s.index}.txt", q)
        print(f"snapshot {s.index}: {c.m} clusters, Q={q if q is None else round(q, 3)}")


def cmd_embed(a):
    from .communities import write_clustering
    from .embeddings import come_lite, write_communities, write_embeddings
    from .experiment import derive_seed

    work = Path(a.work)
    ks = {c.snapshot_index: c.m for c in _read_clusterings(work / "louvain")}
    params = EmbeddingParams(
        dim=a.dim, walks_per_node=a.walks_per_node, walk_length=a.walk_length, window=a.window,
        negatives=a.negatives, lr=a.lr, epochs=a.epochs, refine_rounds=a.refine_rounds, pull=a.pull,
    )
    out = work / "come"
    out.mkdir(parents=True, exist_ok=True)
    for s in _read_snapshots(work):
        k = a.k or ks.get(s.index)
        if k is None:
            raise DataError(f"no Louvain clustering for snapshot {s.index}; run detect or pass --k")
        emb, c, g = come_lite(s, k, params, derive_seed(a.seed, 3, s.index))
        write_embeddings(emb, out / f"embeddings_{s.index}.txt")
        write_communities(g, out / f"communities_{s.index}.txt")
        write_clustering(c, out / f"clustering_{s.index}.txt")
        print(f"snapshot {s.index}: embedded {len(emb)} nodes into {k} communities")


def cmd_track(a):
    from .tracking import label_nodes, track, write_labels, write_lineage

    work = Path(a.work)
    snaps = _read_snapshots(work)
    cl = _read_clusterings(work / a.clusters)
    maps = track(cl, a.similarity)
    labels = []
    for i, lm in enumerate(maps):
        labels.extend(label_nodes(snaps[i], snaps[i + 1], cl[i], cl[i + 1], lm))
    write_labels(labels, work / "labels.txt")
    write_lineage(maps, work / "lineage.txt", first=cl[0])
    print(f"{len(labels)} labels over {len(maps)} transitions")


def cmd_featurize(a):
    from .embeddings import read_communities, read_embeddings
    from .features import concat_frames, write_frame
    from .features.classic import classic_feature_frame
    from .features.embedding import embedding_feature_frame

    work = Path(a.work)
    snaps = _read_snapshots(work)
    cl = _read_clusterings(work / a.clusters)
    out = work / "features"
    out.mkdir(parents=True, exist_ok=True)
    for s, c in zip(snaps, cl):
        parts = []
        if a.family in ("classic", "all"):
            parts.append(classic_feature_frame(s, c))
        if a.family in ("come", "all"):
            emb = read_embeddings(work / "come" / f"embeddings_{s.index}.txt", s.index)
            g = read_communities(work / "come" / f"communities_{s.index}.txt")
            parts.append(embedding_feature_frame(emb, c, g, a.metric))
        frame = concat_frames(*parts).select(a.family, a.level)
        write_frame(frame, out / f"features_{s.index}.csv")
    print(f"wrote {len(snaps)} feature matrices to {out}")


def cmd_chain(a):
    from .chains import build_dataset, write_dataset
    from .features import read_frame
    from .tracking import read_labels

    work = Path(a.work)
    frames = [read_frame(p) for p in _sorted_files(work / "features", "features_", ".csv")]
    ds = build_dataset(frames, read_labels(work / "labels.txt"), a.L, a.variant)
    path = work / f"chains_L{a.L}_{a.variant}.csv"
    write_dataset(ds, path)
    print(f"{len(ds)} instances of width {ds.width}: {ds.class_counts()} -> {path}")


def _forest_params(a):
    from .forest import ForestParams

    return ForestParams(n_trees=a.trees, max_depth=a.max_depth, max_features=a.max_features)


def cmd_train(a):
    from .chains import read_dataset
    from .forest import train_forest

    ds = read_dataset(a.dataset)
    f = train_forest(ds.X, ds.y, _forest_params(a), a.seed)
    out = Path(a.out or Path(a.dataset).with_name("forest.json"))
    out.write_text(f.to_json(), encoding="utf-8")
    print(f"trained {len(f.trees)} trees on {len(ds)} instances -> {out}")


def cmd_eval(a):
    from .chains import read_dataset
    from .forest import Forest, cross_validate, evaluate

    ds = read_dataset(a.dataset)
    if a.forest:
        f = Forest.from_json(Path(a.forest).read_text(encoding="utf-8"))
        m = evaluate(f.predict(ds.X), ds.y, classes=sorted(set(ds.y.tolist()) | set(f.classes)))
    else:
        _, m = cross_validate(ds.X, ds.y, a.folds, _forest_params(a), a.seed)
    result = {
        "problem": ds.variant,
        "chain_length": ds.chain_length,
        "per_class": m.per_class(),
        "accuracy": m.accuracy,
        "macro_f1": m.macro_f1,
        "n_instances": len(ds),
        "seed": a.seed,
    }
    out = Path(a.out or Path(a.dataset).with_name("metrics.json"))
    out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for c in m.classes:
        print(f"{c:>6}  P={m.precision[c]:.3f}  R={m.recall[c]:.3f}  F1={m.f1[c]:.3f}")
    print(f"accuracy={m.accuracy:.3f}  macro_f1={m.macro_f1:.3f}")


def _experiment_config(a):
    from .experiment import ExperimentConfig, load_config

    cfg = load_config(a.config) if a.config else ExperimentConfig()
    changes = {"seed": a.seed}
    if a.out_dir:
        changes["out_dir"] = a.out_dir
    if a.chain_length:
        changes["chain_lengths"] = tuple(a.chain_length)
    if a.variant:
        changes["variants"] = tuple(a.variant)
    if a.edges:
        changes["data"] = dataclasses.replace(cfg.data, source="edges", path=a.edges)
    return cfg.replace(**changes)


def _summarise(rr):
    for c in rr.cells:
        if c["status"] == "ok":
            f1 = "  ".join(f"{k}={v['F1']:.3f}" for k, v in c["per_class"].items())
            print(f"{c['problem']:>4} {c['feature_set']:<12} L={c['chain_length']}  {f1}  macro_f1={c['macro_f1']:.3f}")
        else:
            print(f"{c['problem']:>4} {c['feature_set']:<12} L={c['chain_length']}  FAILED: {c['error']}")


def cmd_run(a):
    from .experiment import emit_report, run_experiment

    cfg = _experiment_config(a)
    rr = run_experiment(cfg)
    emit_report(rr, cfg.out_dir)
    _summarise(rr)
    print(f"report written to {cfg.out_dir}")


def _parse_value(axis, v):
    if axis == "chain_length":
        return int(v)
    if axis == "ratio":
        return float(v)
    return v


def cmd_sweep(a):
    from .experiment import emit_report, sweep

    cfg = _experiment_config(a)
    values = [_parse_value(a.axis, v) for v in a.values.split(",") if v.strip()]
    rr = sweep(cfg, a.axis, values)
    emit_report(rr, cfg.out_dir)
    for r in rr.sweep:
        print(f"{a.axis}={r['value']}  {r['problem']:>4} {r['class']:>6}  f1={r['f1']:.3f}  macro_f1={r['macro_f1']:.3f}")
    print(f"report written to {cfg.out_dir}")


def cmd_report(a):
    from .experiment import ResultsReport, emit_report

    try:
        rr = ResultsReport.from_json(Path(a.results).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{a.results} does not exist") from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"{a.results}: not a results file ({exc})") from None
    files = emit_report(rr, a.out_dir or Path(a.results).parent)
    for f in files:
        print(f)


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--max-features", default="sqrt")


def _add_experiment_flags(p):
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--out-dir")
    p.add_argument("--edges", help="use this edge list instead of the generator")
    p.add_argument("--chain-length", type=int, action="append", help="repeatable")
    p.add_argument("--variant", choices=("SMD", "SL", "SM"), action="append", help="repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clusterfate", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, work=True, seed=False):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        if work:
            p.add_argument("--work", required=True, help="work directory")
        if seed:
            p.add_argument("--seed", type=int, required=True)
        return p

    p = add("generate", cmd_generate, "write a synthetic temporal network", seed=True)
    p.add_argument("--nodes", type=int, default=1500)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--snapshots", type=int, default=10)
    p.add_argument("--ratio", type=float, default=0.7)
    p.add_argument("--p-drop", type=float, default=0.08)
    p.add_argument("--p-move", type=float, default=0.3)

    p = add("ingest", cmd_ingest, "parse and canonicalise an edge list")
    p.add_argument("edges")
    p.add_argument("--directed", action="store_true", help="keep edge direction")

    p = add("snapshot", cmd_snapshot, "split the edge list into snapshots")
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--balance", choices=("edges", "time"), default="edges")
    p.add_argument("--dmin", type=int, default=0)

    add("detect", cmd_detect, "Louvain communities of every snapshot", seed=True)

    p = add("embed", cmd_embed, "ComE-lite embeddings and communities", seed=True)
    p.add_argument("--k", type=int, help="community count (default: Louvain's)")
    for name, default in dataclasses.asdict(EmbeddingParams()).items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=type(default), default=default)

    p = add("track", cmd_track, "map clusters across snapshots and label nodes")
    p.add_argument("--clusters", choices=("come", "louvain", "truth"), default="come")
    p.add_argument("--similarity", choices=("overlap", "jaccard"), default="overlap")

    p = add("featurize", cmd_featurize, "per-snapshot feature matrices")
    p.add_argument("--clusters", choices=("come", "louvain", "truth"), default="come")
    p.add_argument("--family", choices=("classic", "come", "all"), default="all")
    p.add_argument("--level", choices=("in", "out", "all"), default="all")
    p.add_argument("--metric", choices=("euclidean", "cosine", "l1"), default="euclidean")

    p = add("chain", cmd_chain, "build a historical-chain dataset")
    p.add_argument("--L", type=int, default=5)
    p.add_argument("--variant", choices=("SMD", "SL", "SM"), default="SMD")

    p = add("train", cmd_train, "train a random forest on a chain dataset", work=False, seed=True)
    p.add_argument("dataset")
    p.add_argument("--out")
    _add_forest_flags(p)

    p = add("eval", cmd_eval, "evaluate a forest, or cross-validate without --forest", work=False, seed=True)
    p.add_argument("dataset")
    p.add_argument("--forest")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out")
    _add_forest_flags(p)

    p = add("run", cmd_run, "end-to-end experiment", work=False, seed=True)
    _add_experiment_flags(p)

    p = add("sweep", cmd_sweep, "one experiment per value of an axis", work=False, seed=True)
    _add_experiment_flags(p)
    p.add_argument("--axis", choices=("chain_length", "ratio", "feature_set"), required=True)
    p.add_argument("--values", required=True, help="comma separated, e.g. 2,3,4 or classic/all,come/all")

    p = add("report", cmd_report, "re-emit tables from a results.json", work=False)
    p.add_argument("results")
    p.add_argument("--out-dir")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not a.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    from .experiment import StageError

    try:
        a.func(a)
    except StageError as exc:
        print(f"error: {exc}\ncompleted stages: {', '.join(exc.partial) or 'none'}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, ConfigError) else EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ClusterFateError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
