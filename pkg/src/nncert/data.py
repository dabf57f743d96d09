"""Dataset representation, binary ingestion, the poisoning-size metric, and
backdoor trigger embedding.

Labels are 1-based everywhere inside the package (1..num_classes); raw file
labels (0-based) are shifted on ingest. Training data is a multiset: bit
identical duplicate examples are legal and are counted with multiplicity.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    DimensionMismatch,
    LabelOutOfRange,
    NonNumericField,
    RaggedRow,
    TriggerTooLarge,
    TruncatedFile,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes


@dataclass(frozen=True)
class Image:
    """8-bit image, row-major, channel-planar for 3-channel inputs."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray  # uint8, flat, length width*height*channels

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.size != self.width * self.height * self.channels:
            raise ValueError(
                f"pixel buffer has {px.size} bytes, expected "
                f"{self.width * self.height * self.channels}"
            )
        px = px.reshape(-1)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    def planes(self) -> np.ndarray:
        """View as (channels, height, width)."""
        return self.pixels.reshape(self.channels, self.height, self.width)


@dataclass(frozen=True)
class Example:
    """A labeled feature vector; the unit of training data and of attack."""

    features: np.ndarray  # (d,) float64
    label: int

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ValueError("features must be a 1-D vector")
        if not np.isfinite(feats).all():
            raise ValueError("features must be finite")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", int(self.label))

    def key(self) -> tuple[bytes, int]:
        """Exact identity used for multiset arithmetic: bitwise features + label."""
        return (self.features.tobytes(), self.label)


def _check_feature_matrix(features, labels, num_classes):
    feats = np.ascontiguousarray(features, dtype=np.float64)
    labs = np.ascontiguousarray(labels, dtype=np.int64)
    if feats.ndim != 2:
        raise ValueError("features must be a 2-D (n, d) array")
    if labs.ndim != 1 or labs.shape[0] != feats.shape[0]:
        raise ValueError("labels must be a 1-D array aligned with features")
    if feats.size and not np.isfinite(feats).all():
        raise ValueError("features must be finite")
    if num_classes < 2:
        raise ValueError("num_classes must be at least 2")
    if labs.size and (labs.min() < 1 or labs.max() > num_classes):
        raise LabelOutOfRange(
            f"labels must lie in 1..{num_classes}, "
            f"found range [{labs.min()}, {labs.max()}]"
        )
    feats.flags.writeable = False
    labs.flags.writeable = False
    return feats, labs


@dataclass(frozen=True)
class Dataset:
    """A multiset of labeled feature vectors. Immutable after construction."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in 1..num_classes
    num_classes: int

    def __post_init__(self):
        feats, labs = _check_feature_matrix(self.features, self.labels, self.num_classes)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def example(self, i: int) -> Example:
        return Example(self.features[i], int(self.labels[i]))

    def example_keys(self) -> list[tuple[bytes, int]]:
        row_bytes = self.features.shape[1] * 8
        blob = self.features.tobytes()
        return [
            (blob[i * row_bytes : (i + 1) * row_bytes], int(self.labels[i]))
            for i in range(len(self))
        ]

    @cached_property
    def rank_digests(self) -> list[bytes]:
        # imported here to keep the module dependency one-way
        from .neighbors import rank_hash

        return [
            rank_hash(self.features[i], int(self.labels[i])) for i in range(len(self))
        ]

    @cached_property
    def tie_rank(self) -> np.ndarray:
        """Position of each example in the (rank descending, index ascending)
        order; smaller tie_rank wins distance ties.

        The rank of an example depends only on (features, label), never on its
        dataset position, so poisoned examples cannot reorder clean ones.
        """
        digests = self.rank_digests
        inverted = [bytes(255 ^ byte for byte in d) for d in digests]
        order = sorted(range(len(self)), key=lambda i: (inverted[i], i))
        tie = np.empty(len(self), dtype=np.int64)
        tie[order] = np.arange(len(self))
        tie.flags.writeable = False
        return tie


@dataclass(frozen=True)
class TestSet:
    """Indexed sequence of (features, true_label) pairs."""

    features: np.ndarray  # (t, d) float64
    labels: np.ndarray  # (t,) int64 in 1..num_classes
    num_classes: int

    def __post_init__(self):
        feats, labs = _check_feature_matrix(self.features, self.labels, self.num_classes)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def dataset_from_examples(examples: Sequence[Example], num_classes: int) -> Dataset:
    if not examples:
        raise ValueError("cannot infer dimension from an empty example list")
    feats = np.stack([e.features for e in examples])
    labs = np.array([e.label for e in examples], dtype=np.int64)
    return Dataset(feats, labs, num_classes)


# ---------------------------------------------------------------------------
# binary ingestion


def _read_exact(buf: bytes, offset: int, count: int, path) -> bytes:
    if offset + count > len(buf):
        raise TruncatedFile(
            f"{path}: expected {count} bytes at offset {offset}, "
            f"file ends at {len(buf)}"
        )
    return buf[offset : offset + count]


def load_idx(images_path, labels_path) -> tuple[list[Image], list[int]]:
    """Load an IDX image/label file pair (big-endian headers).

    Raw labels 0..9 are shifted to 1..10.
    """
    img_buf = Path(images_path).read_bytes()
    lbl_buf = Path(labels_path).read_bytes()

    magic = struct.unpack(">I", _read_exact(img_buf, 0, 4, images_path))[0]
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagic(
            f"{images_path}: image magic at offset 0 is 0x{magic:08x}, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x}"
        )
    n_images, rows, cols = struct.unpack(
        ">III", _read_exact(img_buf, 4, 12, images_path)
    )

    magic = struct.unpack(">I", _read_exact(lbl_buf, 0, 4, labels_path))[0]
    if magic != IDX_LABEL_MAGIC:
        raise BadMagic(
            f"{labels_path}: label magic at offset 0 is 0x{magic:08x}, "
            f"expected 0x{IDX_LABEL_MAGIC:08x}"
        )
    n_labels = struct.unpack(">I", _read_exact(lbl_buf, 4, 4, labels_path))[0]

    if n_images != n_labels:
        raise CountMismatch(
            f"{images_path} declares {n_images} images but "
            f"{labels_path} declares {n_labels} labels"
        )

    pixel_bytes = _read_exact(img_buf, 16, n_images * rows * cols, images_path)
    label_bytes = _read_exact(lbl_buf, 8, n_labels, labels_path)

    raw = np.frombuffer(pixel_bytes, dtype=np.uint8).reshape(n_images, rows * cols)
    raw_labels = np.frombuffer(label_bytes, dtype=np.uint8)
    if raw_labels.size and raw_labels.max() > 9:
        bad = int(np.argmax(raw_labels > 9))
        raise LabelOutOfRange(
            f"{labels_path}: raw label {raw_labels[bad]} at record {bad} exceeds 9"
        )

    images = [Image(cols, rows, 1, raw[i]) for i in range(n_images)]
    labels = [int(v) + 1 for v in raw_labels]
    return images, labels


def load_cifar10(batch_paths) -> tuple[list[Image], list[int]]:
    """Load CIFAR-10 binary batches (3073-byte records, planar RGB)."""
    images: list[Image] = []
    labels: list[int] = []
    for path in batch_paths:
        buf = Path(path).read_bytes()
        if len(buf) % CIFAR_RECORD_BYTES != 0:
            raise TruncatedFile(
                f"{path}: length {len(buf)} is not a multiple of "
                f"{CIFAR_RECORD_BYTES}; record truncated at offset "
                f"{len(buf) - len(buf) % CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        for rec_no, rec in enumerate(records):
            raw_label = int(rec[0])
            if raw_label > 9:
                raise LabelOutOfRange(
                    f"{path}: raw label byte {raw_label} at record {rec_no} exceeds 9"
                )
            images.append(Image(32, 32, 3, rec[1:]))
            labels.append(raw_label + 1)
    return images, labels


# ---------------------------------------------------------------------------
# feature CSV (precomputed-feature import/export path)


def load_feature_csv(path, num_classes: int) -> Dataset:
    """Parse `label,f1,...,fd` lines into a Dataset, preserving line order."""
    rows: list[list[float]] = []
    labels: list[int] = []
    dim = None
    with open(path, "r", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(",")
            try:
                label = int(fields[0])
            except ValueError:
                raise NonNumericField(
                    f"{path}:{line_no}: label field {fields[0]!r} is not an integer"
                ) from None
            if not 1 <= label <= num_classes:
                raise LabelOutOfRange(
                    f"{path}:{line_no}: label {label} outside 1..{num_classes}"
                )
            try:
                feats = [float(f) for f in fields[1:]]
            except ValueError:
                raise NonNumericField(
                    f"{path}:{line_no}: non-numeric feature field"
                ) from None
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise RaggedRow(
                    f"{path}:{line_no}: row has {len(feats)} features, "
                    f"previous rows have {dim}"
                )
            rows.append(feats)
            labels.append(label)
    if dim is None:
        raise TruncatedFile(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64), labels, num_classes)


def write_feature_csv(features: np.ndarray, labels: np.ndarray, path) -> None:
    """Write `label,f1,...,fd` rows with LF endings and round-trip floats.

    repr() of a Python float is the shortest decimal string that parses back
    to the same bits, so export/import is lossless.
    """
    with open(path, "w", newline="\n") as fh:
        for row, label in zip(np.asarray(features, dtype=np.float64), labels):
            fh.write(str(int(label)))
            for v in row:
                fh.write(",")
                fh.write(repr(float(v)))
            fh.write("\n")


def testset_from_csv(path, num_classes: int) -> TestSet:
    ds = load_feature_csv(path, num_classes)
    return TestSet(ds.features, ds.labels, num_classes)


# ---------------------------------------------------------------------------
# poisoning-size metric


def poisoning_size(d: Dataset, d_star: Dataset) -> int:
    """Minimal number of modified/added/removed examples turning d into d_star.

    max(|D*|, |D|) - |D* intersect D| over multisets, where example equality
    is exact bitwise feature equality plus label equality.
    """
    if d.dim != d_star.dim:
        raise DimensionMismatch(
            f"datasets have dimensions {d.dim} and {d_star.dim}"
        )
    if d.num_classes != d_star.num_classes:
        raise DimensionMismatch(
            f"datasets have {d.num_classes} and {d_star.num_classes} classes"
        )
    common = Counter(d.example_keys()) & Counter(d_star.example_keys())
    return max(len(d), len(d_star)) - sum(common.values())


# ---------------------------------------------------------------------------
# backdoor trigger


def embed_trigger(image: Image, square_side: int, intensity: int = 255) -> Image:
    """Return a copy with a square_side x square_side block of every channel,
    anchored at the bottom-right corner, set to `intensity`."""
    if square_side > min(image.width, image.height):
        raise TriggerTooLarge(
            f"trigger side {square_side} exceeds image "
            f"{image.width}x{image.height}"
        )
    if not 0 <= intensity <= 255:
        raise ValueError(f"intensity {intensity} outside 0..255")
    if square_side == 0:
        return image
    planes = image.planes().copy()
    planes[:, image.height - square_side :, image.width - square_side :] = intensity
    return Image(image.width, image.height, image.channels, planes.reshape(-1))


def make_backdoor_testset(
    examples: Sequence[tuple[Image, int]], square_side: int, intensity: int = 255
) -> list[tuple[Image, int]]:
    """Embed the trigger into every test image, keeping true labels."""
    return [
        (embed_trigger(img, square_side, intensity), label) for img, label in examples
    ]
