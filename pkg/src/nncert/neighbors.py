"""Exact L1 nearest-neighbor retrieval and majority-vote tallying.

Ties are broken deterministically everywhere:

* distance ties between training examples go to the larger rank hash, a
  SHA-256 digest of (features, label) that does not depend on where the
  example sits in the dataset;
* vote-count ties between labels go to the larger label.

Both rules are what make the certificates in `certify` well defined, so no
randomness is allowed on either path.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DatasetTooSmall, DimensionMismatch

DIGEST_BYTES = 32


def rank_hash(features: np.ndarray, label: int) -> bytes:
    """32-byte digest of the example; compared big-endian lexicographically.

    Serialization is fixed so ranks are reproducible: each feature as an
    8-byte little-endian IEEE-754 double in index order, then the label as a
    4-byte little-endian unsigned integer.
    """
    feats = np.ascontiguousarray(features, dtype="<f8")
    return hashlib.sha256(feats.tobytes() + struct.pack("<I", label)).digest()


def l1_distances(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    """L1 distance from `query` to every row of `matrix`."""
    return np.abs(matrix - query).sum(axis=1)


def l1_distance(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vectors have shapes {u.shape} and {v.shape}")
    return float(l1_distances(u.reshape(1, -1), v.reshape(-1))[0])


@dataclass(frozen=True)
class NeighborSet:
    """Selected neighbors sorted by (distance ascending, rank descending)."""

    indices: np.ndarray  # positions in the source dataset
    distances: np.ndarray
    labels: np.ndarray


def _ordered_selection(dataset: Dataset, dist: np.ndarray, selected: np.ndarray) -> NeighborSet:
    tie = dataset.tie_rank[selected]
    order = np.lexsort((tie, dist[selected]))
    chosen = selected[order]
    return NeighborSet(chosen, dist[chosen], dataset.labels[chosen])


def knn_neighbors(dataset: Dataset, x: np.ndarray, k: int) -> NeighborSet:
    """The k examples minimal under (distance asc, rank desc, index asc)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(dataset) < k:
        raise DatasetTooSmall(f"k={k} but dataset has {len(dataset)} examples")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != dataset.dim:
        raise DimensionMismatch(
            f"query has dimension {x.shape[0]}, dataset has {dataset.dim}"
        )
    dist = l1_distances(dataset.features, x)
    order = np.lexsort((dataset.tie_rank, dist))
    chosen = order[:k]
    return NeighborSet(chosen, dist[chosen], dataset.labels[chosen])


def rnn_neighbors(dataset: Dataset, x: np.ndarray, r: float) -> NeighborSet:
    """Exactly the examples at distance <= r (boundary inclusive); may be empty."""
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != dataset.dim:
        raise DimensionMismatch(
            f"query has dimension {x.shape[0]}, dataset has {dataset.dim}"
        )
    dist = l1_distances(dataset.features, x)
    selected = np.flatnonzero(dist <= r)
    return _ordered_selection(dataset, dist, selected)


@dataclass(frozen=True)
class VoteTally:
    """Per-label vote counts with the rank-broken top-two labels.

    Count ties resolve toward the larger label, so s_a == s_b implies a > b.
    An empty neighbor set therefore tallies to a = c, b = c - 1.
    """

    counts: np.ndarray  # counts[l - 1] = votes for label l
    a: int
    b: int
    s_a: int
    s_b: int


def tally(neighbor_set: NeighborSet, num_classes: int) -> VoteTally:
    if num_classes < 2:
        raise ValueError("tallying requires at least two classes")
    counts = np.bincount(neighbor_set.labels, minlength=num_classes + 1)[1:]
    ranked = sorted(range(1, num_classes + 1), key=lambda l: (counts[l - 1], l), reverse=True)
    a, b = ranked[0], ranked[1]
    counts.flags.writeable = False
    return VoteTally(counts, a, b, int(counts[a - 1]), int(counts[b - 1]))


def predict(vote_tally: VoteTally) -> int:
    """Majority-vote label (ties already resolved inside the tally)."""
    return vote_tally.a
