"""End-to-end command-line tests over small on-disk datasets."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from nncert.cli import build_parser, main
from nncert.synthetic import make_corpus, write_mnist_idx


@pytest.fixture(scope="module")
def idx_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("idx")
    train_images, train_labels, test_images, test_labels = make_corpus(120, 30, 11)
    write_mnist_idx(root, train_images, train_labels, test_images, test_labels)
    return [
        str(root / "train-images-idx3-ubyte"),
        str(root / "train-labels-idx1-ubyte"),
        str(root / "t10k-images-idx3-ubyte"),
        str(root / "t10k-labels-idx1-ubyte"),
    ]


@pytest.fixture(scope="module")
def cifar_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cifar")

    def write_batch(name, n, seed):
        rng = np.random.default_rng(seed)
        records = []
        for _ in range(n):
            label = rng.integers(0, 10, size=1)
            pixels = rng.integers(0, 256, size=3072)
            records.append(np.concatenate([label, pixels]).astype(np.uint8))
        path = root / name
        path.write_bytes(np.concatenate(records).tobytes())
        return str(path)

    return [
        write_batch("data_batch_1.bin", 12, 1),
        write_batch("data_batch_2.bin", 12, 2),
        write_batch("test_batch.bin", 8, 3),
    ]


def run(argv):
    return main(argv)


def read_sidecar(out):
    return json.loads(Path(out + ".json").read_text())


def certify_args(idx_files, out, *extra):
    return ["certify", *idx_files, "--e-max", "20", "--e-step", "10", "--out", out, *extra]


def test_certify_writes_curve_and_sidecar(idx_files, tmp_path):
    out = str(tmp_path / "curve.csv")
    assert run(certify_args(idx_files, out)) == 0
    lines = Path(out).read_text().splitlines()
    assert lines[0] == "e,ca_individual,ca_joint,n_test"
    assert len(lines) == 1 + 3  # e = 0, 10, 20
    assert all(line.endswith(",,30") for line in lines[1:])  # individual method
    assert lines[1].startswith("0,")

    sidecar = read_sidecar(out)
    assert sidecar["command"] == "certify"
    assert sidecar["config"]["algo"] == "rnn"
    assert sidecar["config"]["r"] == 4.0  # idx default radius
    assert sidecar["config"]["feature"] == "hog"
    assert sidecar["config"]["hog"]["cell_side"] == 7
    assert sidecar["num_classes"] == 10
    assert sidecar["n_train"] == 120
    assert sidecar["n_test"] == 30
    assert sidecar["feature_dim"] == 324
    digest = hashlib.sha256(Path(idx_files[0]).read_bytes()).hexdigest()
    assert sidecar["inputs"][idx_files[0]] == digest
    assert len(sidecar["inputs"]) == 4


def test_cifar_batches_resolve_their_own_defaults(cifar_files, tmp_path):
    out = str(tmp_path / "curve.csv")
    assert run(["certify", *cifar_files, "--e-max", "10", "--e-step", "5", "--out", out]) == 0
    sidecar = read_sidecar(out)
    assert sidecar["config"]["r"] == 20.0
    assert sidecar["config"]["hog"]["cell_side"] == 8
    assert sidecar["n_train"] == 24  # two concatenated train batches
    assert sidecar["n_test"] == 8
    assert sidecar["feature_dim"] == 3 * 3 * 4 * 9


def test_thread_count_never_changes_output_bytes(idx_files, tmp_path):
    one = str(tmp_path / "one.csv")
    four = str(tmp_path / "four.csv")
    assert run(certify_args(idx_files, one, "--method", "joint-island", "--threads", "1")) == 0
    assert run(certify_args(idx_files, four, "--method", "joint-island", "--threads", "4")) == 0
    assert Path(one).read_bytes() == Path(four).read_bytes()


def test_knn_joint_certification_is_refused(idx_files, tmp_path, capsys):
    out = str(tmp_path / "curve.csv")
    rc = run(certify_args(idx_files, out, "--algo", "knn", "--method", "joint-island"))
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: joint certification requires rnn")
    assert not Path(out).exists()


def test_trigger_needs_image_input(idx_files, tmp_path, capsys):
    train_csv = str(tmp_path / "train.csv")
    test_csv = str(tmp_path / "test.csv")
    assert run(["ingest", idx_files[0], idx_files[1], "--out", train_csv]) == 0
    assert run(["ingest", idx_files[2], idx_files[3], "--out", test_csv]) == 0
    out = str(tmp_path / "curve.csv")
    rc = run(
        ["certify", train_csv, test_csv, "--feature", "csv", "--trigger",
         "--e-max", "10", "--e-step", "5", "--out", out]
    )
    assert rc == 1
    assert "trigger needs image input" in capsys.readouterr().err


def test_certify_runs_on_precomputed_csv_features(idx_files, tmp_path):
    train_csv = str(tmp_path / "train.csv")
    test_csv = str(tmp_path / "test.csv")
    assert run(["ingest", idx_files[0], idx_files[1], "--out", train_csv]) == 0
    assert run(["ingest", idx_files[2], idx_files[3], "--out", test_csv]) == 0
    assert len(Path(train_csv).read_text().splitlines()) == 120
    out = str(tmp_path / "curve.csv")
    rc = run(
        ["certify", train_csv, test_csv, "--feature", "csv",
         "--e-max", "10", "--e-step", "5", "--out", out]
    )
    assert rc == 0
    sidecar = read_sidecar(out)
    assert sidecar["feature_dim"] == 324
    assert sidecar["n_train"] == 120

    # ingestion is deterministic byte for byte
    again = str(tmp_path / "again.csv")
    assert run(["ingest", idx_files[0], idx_files[1], "--out", again]) == 0
    assert Path(again).read_bytes() == Path(train_csv).read_bytes()


def test_ingest_raw_cifar_keeps_pixel_dimension(cifar_files, tmp_path):
    out = str(tmp_path / "raw.csv")
    assert run(["ingest", cifar_files[2], "--feature", "raw", "--out", out]) == 0
    first = Path(out).read_text().splitlines()[0]
    assert len(first.split(",")) == 1 + 3072


def test_bare_trigger_flag_picks_the_format_side(idx_files, tmp_path):
    out = str(tmp_path / "curve.csv")
    assert run(certify_args(idx_files, out, "--trigger")) == 0
    assert read_sidecar(out)["config"]["trigger"] == [5, 255]
    assert run(certify_args(idx_files, out, "--trigger", "3")) == 0
    assert read_sidecar(out)["config"]["trigger"] == [3, 255]
    assert run(certify_args(idx_files, out, "--trigger", "--trigger-intensity", "128")) == 0
    assert read_sidecar(out)["config"]["trigger"] == [5, 128]


def test_subsample_is_seeded_and_recorded(idx_files, tmp_path):
    first = str(tmp_path / "a.csv")
    second = str(tmp_path / "b.csv")
    assert run(certify_args(idx_files, first, "--subsample", "50", "10", "3")) == 0
    assert run(certify_args(idx_files, second, "--subsample", "50", "10", "3")) == 0
    assert Path(first).read_bytes() == Path(second).read_bytes()
    sidecar = read_sidecar(first)
    assert sidecar["n_train"] == 50
    assert sidecar["n_test"] == 10
    assert sidecar["config"]["subsample"] == [50, 10, 3]


def test_oversized_subsample_fails_cleanly(idx_files, tmp_path, capsys):
    out = str(tmp_path / "curve.csv")
    rc = run(certify_args(idx_files, out, "--subsample", "500", "10", "3"))
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bad_grid_and_bad_files_exit_one(idx_files, tmp_path, capsys):
    out = str(tmp_path / "curve.csv")
    assert run(certify_args(idx_files, out, "--e-step", "0")) == 1
    assert "error:" in capsys.readouterr().err

    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"\x01\x02\x03" * 33)
    rc = run(["certify", str(junk), str(junk), str(junk), str(junk), "--out", out])
    assert rc == 1
    assert "cannot identify" in capsys.readouterr().err


def test_oracle_subcommand_exit_codes(tmp_path):
    out = str(tmp_path / "report.json")
    rc = run(["oracle", "--count", "6", "--joint-count", "4", "--seed", "3", "--out", out])
    assert rc == 0
    report = json.loads(Path(out).read_text())
    assert report["individual"]["violations"] == []
    assert report["joint"]["violations"] == []
    assert report["individual"]["datasets_enumerated"] > 0

    rc = run(
        ["oracle", "--count", "6", "--joint-count", "4", "--seed", "3",
         "--claim-slack", "1", "--out", out]
    )
    assert rc == 2
    report = json.loads(Path(out).read_text())
    assert report["individual"]["violations"]


def test_parser_defaults_are_stable():
    args = build_parser().parse_args(["certify", "a", "b", "c", "d"])
    assert (args.algo, args.feature, args.method) == ("rnn", "hog", "individual")
    assert (args.e_max, args.e_step, args.threads, args.seed) == (50, 10, 1, 0)
    assert args.out == "curve.csv"
    assert args.k is None and args.r is None and args.trigger is None
    assert args.trigger_intensity == 255
    bare = build_parser().parse_args(["certify", "a", "b", "c", "d", "--trigger"])
    assert bare.trigger == -1
    orc = build_parser().parse_args(["oracle"])
    assert (orc.count, orc.joint_count, orc.claim_slack) == (100, 50, 0)
    ing = build_parser().parse_args(["ingest", "imgs", "labs"])
    assert ing.feature == "hog" and ing.out == "features.csv"
