"""Command-line front end for certification runs, oracle sweeps, and ingestion.

Three subcommands:

  certify   load a dataset, certify every test example, write the curve CSV
            plus a JSON sidecar recording the resolved configuration and
            input digests
  oracle    run randomized brute-force soundness sweeps and write a JSON
            report (exit 2 if any certificate is violated)
  ingest    convert a raw image dataset to a feature CSV

Input format is detected from file bytes: IDX files start with their magic
number, CIFAR batches are a multiple of 3073 bytes. Positional paths mean
TRAIN_IMAGES TRAIN_LABELS TEST_IMAGES TEST_LABELS for IDX,
TRAIN_BATCH... TEST_BATCH for CIFAR, and TRAIN_CSV TEST_CSV for
`--feature csv`.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certify import (
    ALGORITHMS,
    METHODS,
    CurveConfig,
    curve,
    e_grid,
    write_curve_csv,
)
from .data import (
    Dataset,
    TestSet,
    embed_trigger,
    load_cifar10,
    load_feature_csv,
    load_idx,
    testset_from_csv,
    write_feature_csv,
)
from .errors import BadMagic, NNCertError
from .features import HogParams, flatten_raw, hog
from .oracle import DEFAULT_CEILING, individual_sweep, joint_sweep

_IDX_MAGICS = (0x00000803, 0x00000801)
_CIFAR_RECORD_BYTES = 3073

# Format-dependent defaults: radius and trigger side scale with image size,
# and the cell side is chosen to divide the image side evenly.
_FORMAT_DEFAULTS = {
    "idx": {"r": 4.0, "trigger": 5, "hog_cell": 7},
    "cifar": {"r": 20.0, "trigger": 10, "hog_cell": 8},
    "csv": {"r": 4.0, "trigger": 5, "hog_cell": 7},
}

_IMAGE_CLASSES = 10  # both supported raw formats are ten-class


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one certification run."""

    algo: str
    k: int | None
    r: float | None
    feature: str
    hog_params: HogParams
    trigger: tuple[int, int] | None  # (square_side, intensity)
    e_max: int
    e_step: int
    method: str
    seed: int
    threads: int
    out: str
    subsample: tuple[int, int, int] | None  # (n_train, n_test, seed)

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.feature not in ("raw", "hog", "csv"):
            raise ValueError(f"unknown feature choice {self.feature!r}")
        if (self.k is None) == (self.r is None):
            raise ValueError("exactly one of k/r must be set")
        if self.algo == "knn" and self.k is None:
            raise ValueError("knn requires --k")
        if self.algo == "rnn" and self.r is None:
            raise ValueError("rnn requires --r")
        if self.e_step < 1:
            raise ValueError(f"e_step must be >= 1, got {self.e_step}")
        if self.e_max < 0:
            raise ValueError(f"e_max must be >= 0, got {self.e_max}")

    def to_json_dict(self):
        return {
            "algo": self.algo,
            "k": self.k,
            "r": self.r,
            "feature": self.feature,
            "hog": {
                "orientations": self.hog_params.orientations,
                "cell_side": self.hog_params.cell_side,
                "block_side": self.hog_params.block_side,
                "block_stride": self.hog_params.block_stride,
                "clip": self.hog_params.clip,
            },
            "trigger": list(self.trigger) if self.trigger else None,
            "e_max": self.e_max,
            "e_step": self.e_step,
            "method": self.method,
            "seed": self.seed,
            "threads": self.threads,
            "out": self.out,
            "subsample": list(self.subsample) if self.subsample else None,
        }


def _sniff_format(path, feature):
    if feature == "csv":
        return "csv"
    with open(path, "rb") as fh:
        head = fh.read(4)
    if len(head) == 4 and int.from_bytes(head, "big") in _IDX_MAGICS:
        return "idx"
    size = Path(path).stat().st_size
    if size and size % _CIFAR_RECORD_BYTES == 0:
        return "cifar"
    raise BadMagic(
        f"{path}: no IDX magic and size {size} is not a multiple of "
        f"{_CIFAR_RECORD_BYTES}; cannot identify the format"
    )


def _split_paths(fmt, paths):
    if fmt == "csv":
        if len(paths) != 2:
            raise ValueError(f"csv input takes TRAIN_CSV TEST_CSV, got {len(paths)} paths")
        return paths[:1], paths[1:]
    if fmt == "idx":
        if len(paths) != 4:
            raise ValueError(
                "idx input takes TRAIN_IMAGES TRAIN_LABELS TEST_IMAGES "
                f"TEST_LABELS, got {len(paths)} paths"
            )
        return paths[:2], paths[2:]
    if len(paths) < 2:
        raise ValueError("cifar input takes TRAIN_BATCH... TEST_BATCH")
    return paths[:-1], paths[-1:]


def _load_raw(fmt, train_paths, test_paths):
    if fmt == "idx":
        return load_idx(*train_paths), load_idx(*test_paths)
    return load_cifar10(train_paths), load_cifar10(test_paths)


def _subsample_indices(n_avail, n_want, rng, what):
    if n_want > n_avail:
        raise ValueError(f"subsample wants {n_want} {what} examples, only {n_avail} available")
    return np.sort(rng.choice(n_avail, size=n_want, replace=False))


def _extract(images, params, feature):
    if feature == "hog":
        return np.stack([hog(img, params) for img in images])
    return np.stack([flatten_raw(img) for img in images])


def _csv_max_label(path):
    top = 0
    with open(path, "r", newline="") as fh:
        for line in fh:
            line = line.strip()
            if line:
                top = max(top, int(line.split(",", 1)[0]))
    return top


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_certify(config: RunConfig, train_paths, test_paths) -> int:
    if config.feature == "csv":
        if config.trigger is not None:
            raise ValueError("--trigger needs image input, not precomputed csv features")
        num_classes = max(
            _csv_max_label(train_paths[0]), _csv_max_label(test_paths[0]), 2
        )
        train = load_feature_csv(train_paths[0], num_classes)
        test = testset_from_csv(test_paths[0], num_classes)
        train_feats, train_labels = train.features, train.labels
        test_feats, test_labels = test.features, test.labels
    else:
        fmt = _sniff_format(train_paths[0], config.feature)
        (train_imgs, train_lab), (test_imgs, test_lab) = _load_raw(
            fmt, train_paths, test_paths
        )
        num_classes = _IMAGE_CLASSES
        if config.trigger is not None:
            side, intensity = config.trigger
            test_imgs = [embed_trigger(img, side, intensity) for img in test_imgs]
        train_feats = _extract(train_imgs, config.hog_params, config.feature)
        test_feats = _extract(test_imgs, config.hog_params, config.feature)
        train_labels = np.asarray(train_lab, dtype=np.int64)
        test_labels = np.asarray(test_lab, dtype=np.int64)

    if config.subsample is not None:
        n_train, n_test, sub_seed = config.subsample
        rng = np.random.default_rng(sub_seed)
        keep_train = _subsample_indices(len(train_labels), n_train, rng, "train")
        keep_test = _subsample_indices(len(test_labels), n_test, rng, "test")
        train_feats, train_labels = train_feats[keep_train], train_labels[keep_train]
        test_feats, test_labels = test_feats[keep_test], test_labels[keep_test]

    train_set = Dataset(train_feats, train_labels, num_classes)
    test_set = TestSet(test_feats, test_labels, num_classes)
    curve_config = CurveConfig(
        algo=config.algo,
        k=config.k,
        r=config.r,
        method=config.method,
        seed=config.seed,
        threads=config.threads,
    )
    points = curve(train_set, test_set, curve_config, e_grid(config.e_max, config.e_step))
    write_curve_csv(points, config.out)

    sidecar = {
        "command": "certify",
        "config": config.to_json_dict(),
        "inputs": {str(p): _file_digest(p) for p in (*train_paths, *test_paths)},
        "num_classes": num_classes,
        "n_train": len(train_set),
        "n_test": len(test_set),
        "feature_dim": train_set.dim,
    }
    with open(config.out + ".json", "w", newline="\n") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_oracle(count, joint_count, seed, out, claim_slack=0, ceiling=DEFAULT_CEILING) -> int:
    individual = individual_sweep(
        count, seed, claimed_slack=claim_slack, ceiling=ceiling
    )
    joint = joint_sweep(joint_count, seed)
    report = {"individual": individual.to_dict(), "joint": joint.to_dict()}
    with open(out, "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if individual.ok and joint.ok else 2


def cmd_ingest(paths, feature, out, hog_params) -> int:
    fmt = _sniff_format(paths[0], feature)
    if fmt == "idx":
        if len(paths) != 2:
            raise ValueError(f"idx ingestion takes IMAGES LABELS, got {len(paths)} paths")
        images, labels = load_idx(*paths)
    else:
        images, labels = load_cifar10(paths)
    feats = _extract(images, hog_params, feature)
    write_feature_csv(feats, np.asarray(labels, dtype=np.int64), out)
    return 0


def _resolve_hog(args, fmt):
    cell = args.hog_cell if args.hog_cell is not None else _FORMAT_DEFAULTS[fmt]["hog_cell"]
    return HogParams(
        orientations=args.hog_orientations,
        cell_side=cell,
        block_side=args.hog_block,
    )


def _resolve_certify_config(args) -> tuple[RunConfig, list, list]:
    fmt = _sniff_format(args.paths[0], args.feature)
    train_paths, test_paths = _split_paths(fmt, args.paths)

    k, r = args.k, args.r
    if args.algo == "knn" and k is None and r is None:
        k = 5000
    if args.algo == "rnn" and r is None and k is None:
        r = _FORMAT_DEFAULTS[fmt]["r"]

    trigger = None
    if args.trigger is not None:
        side = args.trigger if args.trigger >= 0 else _FORMAT_DEFAULTS[fmt]["trigger"]
        trigger = (side, args.trigger_intensity)

    config = RunConfig(
        algo=args.algo,
        k=k,
        r=r,
        feature=args.feature,
        hog_params=_resolve_hog(args, fmt),
        trigger=trigger,
        e_max=args.e_max,
        e_step=args.e_step,
        method=args.method,
        seed=args.seed,
        threads=args.threads,
        out=args.out,
        subsample=tuple(args.subsample) if args.subsample else None,
    )
    return config, train_paths, test_paths


def _add_hog_flags(parser):
    parser.add_argument("--hog-orientations", type=int, default=9)
    parser.add_argument(
        "--hog-cell", type=int, default=None,
        help="cell side in pixels (default: 7 for 28x28 idx, 8 for cifar)",
    )
    parser.add_argument("--hog-block", type=int, default=2)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nncert",
        description="Pointwise and joint robustness certification for kNN/rNN classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cert = sub.add_parser("certify", help="certify a test set and write the accuracy curve")
    cert.add_argument(
        "paths", nargs="+", metavar="PATH",
        help="idx: TRAIN_IMAGES TRAIN_LABELS TEST_IMAGES TEST_LABELS; "
             "cifar: TRAIN_BATCH... TEST_BATCH; csv: TRAIN_CSV TEST_CSV",
    )
    cert.add_argument("--algo", choices=ALGORITHMS, default="rnn")
    cert.add_argument("--k", type=int, default=None, help="neighbor count (default 5000)")
    cert.add_argument("--r", type=float, default=None,
                      help="neighbor radius (default 4 for idx, 20 for cifar)")
    cert.add_argument("--feature", choices=("raw", "hog", "csv"), default="hog")
    _add_hog_flags(cert)
    cert.add_argument(
        "--trigger", type=int, nargs="?", const=-1, default=None, metavar="SIDE",
        help="embed a corner square trigger of this side into every test image "
             "(bare flag: 5 for idx, 10 for cifar)",
    )
    cert.add_argument("--trigger-intensity", type=int, default=255)
    cert.add_argument("--e-max", type=int, default=50)
    cert.add_argument("--e-step", type=int, default=10)
    cert.add_argument("--method", choices=METHODS, default="individual")
    cert.add_argument("--seed", type=int, default=0)
    cert.add_argument("--threads", type=int, default=1)
    cert.add_argument("--out", default="curve.csv")
    cert.add_argument(
        "--subsample", nargs=3, type=int, metavar=("N_TRAIN", "N_TEST", "SEED"),
        help="certify a seeded random subsample instead of the full dataset",
    )

    orc = sub.add_parser("oracle", help="brute-force soundness sweeps over random instances")
    orc.add_argument("--count", type=int, default=100, help="individual-certificate instances")
    orc.add_argument("--joint-count", type=int, default=50, help="joint-certificate instances")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument(
        "--claim-slack", type=int, default=0,
        help="add this to every claimed certificate before checking "
             "(positive values must make the sweep fail)",
    )
    orc.add_argument("--ceiling", type=int, default=DEFAULT_CEILING)
    orc.add_argument("--out", default="oracle_report.json")

    ing = sub.add_parser("ingest", help="convert an image dataset to a feature CSV")
    ing.add_argument(
        "paths", nargs="+", metavar="PATH",
        help="idx: IMAGES LABELS; cifar: BATCH...",
    )
    ing.add_argument("--feature", choices=("raw", "hog"), default="hog")
    _add_hog_flags(ing)
    ing.add_argument("--out", default="features.csv")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "certify":
            config, train_paths, test_paths = _resolve_certify_config(args)
            return cmd_certify(config, train_paths, test_paths)
        if args.command == "oracle":
            return cmd_oracle(
                args.count,
                args.joint_count,
                args.seed,
                args.out,
                claim_slack=args.claim_slack,
                ceiling=args.ceiling,
            )
        config_fmt = _sniff_format(args.paths[0], args.feature)
        return cmd_ingest(args.paths, args.feature, args.out, _resolve_hog(args, config_fmt))
    except (NNCertError, OSError, ValueError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main(argv=sys.argv[1:]))
