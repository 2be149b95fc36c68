import json

import pytest

from clusterfate.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """A tiny work directory taken through every stage command."""
    w = tmp_path_factory.mktemp("work")
    steps = [
        ["generate", "--work", str(w), "--seed", "0", "--nodes", "120", "--clusters", "3", "--snapshots", "5"],
        ["snapshot", "--work", str(w), "--T", "5", "--balance", "time"],
        ["detect", "--work", str(w), "--seed", "0"],
        ["embed", "--work", str(w), "--seed", "0", "--dim", "8", "--walks-per-node", "3", "--walk-length", "12",
         "--gmm-restarts", "2"],
        ["track", "--work", str(w)],
        ["featurize", "--work", str(w)],
        ["chain", "--work", str(w), "--L", "2", "--variant", "SL"],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv
    return w


def test_stage_outputs(work):
    assert (work / "edges.txt").is_file()
    assert len(list((work / "snapshots").glob("snapshot_*.txt"))) == 5
    assert len(list((work / "louvain").glob("clustering_*.txt"))) == 5
    assert len(list((work / "come").glob("embeddings_*.txt"))) == 5
    assert len(list((work / "features").glob("features_*.csv"))) == 5
    assert (work / "labels.txt").is_file() and (work / "lineage.txt").is_file()
    assert (work / "chains_L2_SL.csv").is_file()


def test_train_and_eval(work):
    ds = str(work / "chains_L2_SL.csv")
    assert main(["train", ds, "--seed", "1", "--trees", "10"]) == EXIT_OK
    assert main(["eval", ds, "--seed", "1", "--forest", str(work / "forest.json")]) == EXIT_OK
    m = json.loads((work / "metrics.json").read_text())
    assert m["problem"] == "SL" and m["chain_length"] == 2
    assert main(["eval", ds, "--seed", "1", "--trees", "10", "--folds", "3", "--out", str(work / "cv.json")]) == EXIT_OK
    assert 0.0 <= json.loads((work / "cv.json").read_text())["macro_f1"] <= 1.0


def test_truth_tracking_reproduces_planted_labels(work, tmp_path):
    out = tmp_path / "w"
    out.mkdir()
    for name in ("snapshots", "truth"):
        (out / name).symlink_to(work / name)
    assert main(["track", "--work", str(out), "--clusters", "truth"]) == EXIT_OK
    assert (out / "labels.txt").read_text() == (work / "truth" / "labels.txt").read_text()


def test_run_and_report(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(
        "variants = [\"SL\"]\nchain_lengths = [2]\nfolds = 3\n"
        "[data]\nsnapshots = 4\n"
        "[generator]\nn_nodes = 120\nn_clusters = 3\nn_snapshots = 4\nd_max = 20\n"
        "[embedding]\ndim = 8\nwalks_per_node = 3\nwalk_length = 12\ngmm_restarts = 2\n"
        "[forest]\nn_trees = 10\n"
    )
    out = tmp_path / "out"
    assert main(["run", "--seed", "0", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    rr = json.loads((out / "results.json").read_text())
    assert rr["cells"][0]["status"] == "ok"
    again = tmp_path / "again"
    assert main(["report", str(out / "results.json"), "--out-dir", str(again)]) == EXIT_OK
    assert (again / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--seed", "0", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG
    assert main(["run", "--seed", "0", "--chain-length", "12"]) == EXIT_CONFIG
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 x\n")
    assert main(["ingest", str(bad), "--work", str(tmp_path / "w")]) == EXIT_DATA
    assert main(["snapshot", "--work", str(tmp_path / "empty")]) == EXIT_DATA
    assert main(["report", str(tmp_path / "nothing.json")]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "config error" in err and "data error" in err


def test_seed_is_required():
    with pytest.raises(SystemExit):
        main(["detect", "--work", "x"])
