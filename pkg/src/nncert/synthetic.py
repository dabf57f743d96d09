"""Synthetic stroke-pattern image corpus with controlled neighborhood geometry.

Ten classes of Gaussian-splatted stroke figures drawn in the top-left
quadrant of a 28x28 canvas. Each class is a small catalog of poses
(sub-pixel shifts and tilts of a home pose) chosen so that descriptor
clusters of different poses stay well separated while remaining within
reach of the home pose at larger vote radii. The bottom-right corner is
kept exactly zero in every image so a corner patch trigger perturbs all
pairwise descriptor distances by the same additive constant.

Class populations and pose mixture weights are deliberately skewed to
spread vote margins across a wide range.
"""

import math
import struct
from functools import lru_cache
from pathlib import Path

import numpy as np

SIDE = 28
NUM_CLASSES = 10

_BOX_LO = 3.0
_BOX_HI = 10.0
_STROKE_SIGMA = 1.0
_AMPLITUDE = 215.0

_SPECKLE_LO = 0.010
_SPECKLE_HI = 0.020

_V_BAR = (((0.0, 0.5), (1.0, 0.5)),)
_H_BAR = (((0.5, 0.0), (0.5, 1.0)),)
_TOP_BAR = (((0.0, 0.0), (0.0, 1.0)),)
_LEFT_BAR = (((0.0, 0.0), (1.0, 0.0)),)
_BOTTOM_BAR = (((1.0, 0.0), (1.0, 1.0)),)
_DIAG = (((0.0, 0.0), (1.0, 1.0)),)
_ANTI = (((0.0, 1.0), (1.0, 0.0)),)
_VEE = (((0.0, 0.0), (1.0, 0.5)), ((1.0, 0.5), (0.0, 1.0)))
_TOP_WIDE = (((0.0, -0.35), (0.0, 1.35)),)


def _ring(n=16, rad=0.5):
    segs = []
    for i in range(n):
        a0 = 2.0 * math.pi * i / n
        a1 = 2.0 * math.pi * (i + 1) / n
        segs.append(((0.5 + rad * math.cos(a0), 0.5 + rad * math.sin(a0)),
                     (0.5 + rad * math.cos(a1), 0.5 + rad * math.sin(a1))))
    return tuple(segs)


_SHAPES = {
    1: _V_BAR,
    2: _VEE + _TOP_WIDE,
    3: _DIAG,
    4: _DIAG + _ANTI,
    5: _V_BAR + _H_BAR,
    6: _ring(),
    7: _TOP_BAR + _LEFT_BAR,
    8: _ANTI,
    9: _VEE,
    10: _TOP_BAR + _LEFT_BAR + _BOTTOM_BAR,
}

# (row shift, col shift, tilt degrees); index 0 is the home pose. Poses were
# selected so descriptor distances sit in [5.4, 7.1] to home and >= 5.4
# pairwise. Class 9 has a single pose: its home sits ~6 from class 2's home,
# which is the only engineered cross-class pair inside radius 8.
_POSES = {
    1: ((0.0, 0.0, 0.0), (-1.0, -1.0, 0.0), (0.0, 0.0, 11.0),
        (0.0, 0.0, -11.0), (-0.5, 1.0, 0.0), (-2.0, 0.5, 0.0)),
    2: ((0.0, 0.0, 0.0), (-2.0, 0.5, 0.0), (0.0, -1.0, 0.0),
        (0.0, 0.0, 11.0), (-0.5, 1.0, 0.0), (0.0, 0.0, -8.0)),
    3: ((0.0, 0.0, 0.0), (-2.0, -2.0, 0.0), (1.0, 0.0, -10.0),
        (0.0, 0.0, -16.0), (-0.5, 1.0, 0.0), (1.0, -2.0, 0.0)),
    4: ((0.0, 0.0, 0.0), (0.5, -1.5, 0.0), (-0.5, -2.0, 0.0),
        (0.0, 0.0, -8.0), (0.0, 1.0, 0.0), (-2.0, -0.5, 0.0)),
    5: ((0.0, 0.0, 0.0), (0.5, -0.5, 0.0), (-0.5, -1.5, 0.0),
        (0.0, 0.0, 16.0), (-2.0, -0.5, 0.0), (0.0, 0.0, -16.0)),
    6: ((0.0, 0.0, 0.0), (0.5, -0.5, 0.0), (-0.5, 1.0, 0.0),
        (1.0, 0.5, 0.0), (0.5, 1.5, 0.0)),
    7: ((0.0, 0.0, 0.0), (-1.0, 1.5, 0.0), (1.0, 0.5, 0.0),
        (-2.0, -1.5, 0.0), (0.0, 0.0, 16.0), (0.5, -2.0, 0.0)),
    8: ((0.0, 0.0, 0.0), (2.0, -2.0, 0.0), (0.0, 0.0, -8.0),
        (-0.5, 2.0, 0.0), (0.0, 0.0, 16.0), (1.0, 1.5, 0.0)),
    9: ((0.0, 0.0, 0.0),),
    10: ((0.0, 0.0, 0.0), (-0.5, -1.5, 0.0), (2.0, 0.0, 0.0),
         (0.0, 0.0, -11.0), (0.0, 1.5, 0.0), (1.0, -2.0, 0.0)),
}

# Fraction of a class drawn in its home pose; the rest is split evenly over
# the remaining poses. Spread out to stagger vote margins across classes.
_HOME_WEIGHT = {
    1: 0.35, 2: 0.45, 3: 0.35, 4: 0.30, 5: 0.26,
    6: 0.35, 7: 0.22, 8: 0.18, 9: 1.00, 10: 0.14,
}

# Relative class frequencies. Class 2 outnumbers class 9 three to one so
# that at radius 8 the class 2 home cluster outvotes class 9 entirely.
_LABEL_RATE = {2: 1.5, 9: 0.5}


def _label_probabilities():
    rates = np.array([_LABEL_RATE.get(l, 1.0) for l in range(1, NUM_CLASSES + 1)])
    return rates / rates.sum()


@lru_cache(maxsize=None)
def _canvas(label, pose_index):
    dr, dc, tilt = _POSES[label][pose_index]
    rows = np.arange(SIDE, dtype=np.float64)[:, None]
    cols = np.arange(SIDE, dtype=np.float64)[None, :]
    canvas = np.zeros((SIDE, SIDE))
    th = math.radians(tilt)
    ct, st = math.cos(th), math.sin(th)
    span = _BOX_HI - _BOX_LO
    for (r0, c0), (r1, c1) in _SHAPES[label]:
        ends = []
        for ru, cu in ((r0, c0), (r1, c1)):
            rr, cc = ru - 0.5, cu - 0.5
            rt = ct * rr - st * cc + 0.5
            ctn = st * rr + ct * cc + 0.5
            ends.append((_BOX_LO + rt * span + dr, _BOX_LO + ctn * span + dc))
        (pr0, pc0), (pr1, pc1) = ends
        length = math.hypot(pr1 - pr0, pc1 - pc0)
        steps = max(2, int(length * 4) + 1)
        for t in np.linspace(0.0, 1.0, steps):
            pr = pr0 + t * (pr1 - pr0)
            pc = pc0 + t * (pc1 - pc0)
            canvas = canvas + np.exp(
                -((rows - pr) ** 2 + (cols - pc) ** 2)
                / (2.0 * _STROKE_SIGMA * _STROKE_SIGMA))
    peak = canvas.max()
    if peak > 0:
        canvas = canvas * (_AMPLITUDE / peak)
    out = np.clip(canvas, 0.0, 255.0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _pose_weights(label):
    poses = _POSES[label]
    home = _HOME_WEIGHT[label]
    if len(poses) == 1:
        return (1.0,)
    rest = (1.0 - home) / (len(poses) - 1)
    return (home,) + (rest,) * (len(poses) - 1)


def _render_example(rng, label):
    weights = _pose_weights(label)
    pose_index = int(rng.choice(len(weights), p=weights))
    canvas = _canvas(label, pose_index)
    rho = _SPECKLE_LO + (_SPECKLE_HI - _SPECKLE_LO) * rng.random() ** 2
    noisy = canvas * (1.0 + rho * rng.normal(size=canvas.shape))
    return np.clip(noisy, 0.0, 255.0).astype(np.uint8)


def make_corpus(n_train, n_test, seed):
    """Generate (train_images, train_labels, test_images, test_labels).

    Images are uint8 arrays of shape (n, 28, 28); labels are in 1..10.
    """
    rng = np.random.default_rng(seed)
    probs = _label_probabilities()
    total = n_train + n_test
    labels = rng.choice(NUM_CLASSES, size=total, p=probs).astype(np.int64) + 1
    images = np.empty((total, SIDE, SIDE), dtype=np.uint8)
    for i in range(total):
        images[i] = _render_example(rng, int(labels[i]))
    return (images[:n_train], labels[:n_train],
            images[n_train:], labels[n_train:])


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


def write_mnist_idx(out_dir, train_images, train_labels, test_images, test_labels):
    """Write the corpus under the conventional IDX file names.

    IDX label files carry 0-based label bytes, so corpus labels 1..10 are
    stored as 0..9 (the loader shifts them back).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte", train_images)
    write_idx_labels(out / "train-labels-idx1-ubyte", np.asarray(train_labels) - 1)
    write_idx_images(out / "t10k-images-idx3-ubyte", test_images)
    write_idx_labels(out / "t10k-labels-idx1-ubyte", np.asarray(test_labels) - 1)
    return out
