#!/usr/bin/env python3
"""Generate the synthetic stroke-pattern corpus and write it as IDX files.

The output directory ends up with the conventional four files
(train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
t10k-labels-idx1-ubyte), ready for `nncert certify` or `nncert ingest`.
"""

import argparse
from collections import Counter

from nncert.synthetic import NUM_CLASSES, make_corpus, write_mnist_idx


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-train", type=int, default=6000)
    parser.add_argument("--n-test", type=int, default=1200)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out-dir", default="data/synthetic")
    args = parser.parse_args()

    train_images, train_labels, test_images, test_labels = make_corpus(
        args.n_train, args.n_test, args.seed
    )
    out = write_mnist_idx(
        args.out_dir, train_images, train_labels, test_images, test_labels
    )

    counts = Counter(train_labels.tolist())
    histogram = " ".join(f"{label}:{counts[label]}" for label in range(1, NUM_CLASSES + 1))
    print(f"wrote {args.n_train} train / {args.n_test} test images to {out}")
    print(f"train label histogram  {histogram}")


if __name__ == "__main__":
    main()
