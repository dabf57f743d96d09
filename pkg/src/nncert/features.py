"""Deterministic feature extraction.

Two extractors ship: raw pixel flattening and a histogram-of-oriented-
gradients descriptor. The HOG variant is pinned bit-exactly (centered
differences with edge replication, bilinear orientation voting, L2-Hys block
normalization) so that the same image and parameters always produce the same
vector, on any machine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Image
from .errors import ImageTooSmall

LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601


@dataclass(frozen=True)
class HogParams:
    orientations: int = 9  # bins over [0, 180) degrees
    cell_side: int = 7  # pixels per cell edge
    block_side: int = 2  # cells per block edge
    block_stride: int = 1  # cells between block origins
    clip: float = 0.2  # L2-Hys clipping threshold

    def __post_init__(self):
        if self.orientations < 1:
            raise ValueError("orientations must be >= 1")
        if min(self.cell_side, self.block_side, self.block_stride) < 1:
            raise ValueError("cell_side, block_side, block_stride must be >= 1")
        if not self.clip > 0:
            raise ValueError("clip must be positive")


def to_grayscale(image: Image) -> np.ndarray:
    """(height, width) float64 intensities; 3-channel inputs use luma weights."""
    planes = image.planes().astype(np.float64)
    if image.channels == 1:
        return planes[0]
    wr, wg, wb = LUMA_WEIGHTS
    return wr * planes[0] + wg * planes[1] + wb * planes[2]


def flatten_raw(image: Image) -> np.ndarray:
    """Pixel intensities scaled to [0, 1], channel-planar row-major order."""
    return image.pixels.astype(np.float64) / 255.0


def _gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # centered differences [-1, 0, 1] with edge replication at the borders
    gx = np.empty_like(gray)
    gx[:, 1:-1] = gray[:, 2:] - gray[:, :-2]
    gx[:, 0] = gray[:, 1] - gray[:, 0]
    gx[:, -1] = gray[:, -1] - gray[:, -2]
    gy = np.empty_like(gray)
    gy[1:-1, :] = gray[2:, :] - gray[:-2, :]
    gy[0, :] = gray[1, :] - gray[0, :]
    gy[-1, :] = gray[-1, :] - gray[-2, :]
    return gx, gy


def hog(image: Image, params: HogParams = HogParams()) -> np.ndarray:
    """Histogram of oriented gradients over unsigned orientations [0, 180).

    Pipeline: crop to a whole number of cells (top-left anchored), centered
    gradients with edge replication, magnitude-weighted bilinear votes into
    the two adjacent orientation bins, per-cell histograms, overlapping
    blocks normalized with L2-Hys, blocks concatenated row-major.

    Orientation is the angle of the gradient vector, so an intensity step
    along the vertical axis votes into the bin pair around 90 degrees.
    """
    cell = params.cell_side
    gray = to_grayscale(image)
    if min(gray.shape) < 2 * cell:
        raise ImageTooSmall(
            f"image {image.width}x{image.height} smaller than two "
            f"{cell}-pixel cells per side"
        )
    n_cells_y = gray.shape[0] // cell
    n_cells_x = gray.shape[1] // cell
    if min(n_cells_y, n_cells_x) < params.block_side:
        raise ImageTooSmall(
            f"{n_cells_y}x{n_cells_x} cells cannot host a "
            f"{params.block_side}-cell block"
        )
    gray = gray[: n_cells_y * cell, : n_cells_x * cell]

    gx, gy = _gradients(gray)
    magnitude = np.hypot(gx, gy)
    theta = np.degrees(np.arctan2(gy, gx)) % 180.0  # [0, 180)

    n_bins = params.orientations
    bin_width = 180.0 / n_bins
    position = theta / bin_width - 0.5  # bin centers at (i + 0.5) * width
    lower = np.floor(position)
    frac = position - lower
    bin_lo = lower.astype(np.int64) % n_bins
    bin_hi = (bin_lo + 1) % n_bins
    # zero-magnitude pixels land in bin 0 with weight 0 and contribute nothing
    weight_lo = magnitude * (1.0 - frac)
    weight_hi = magnitude * frac

    rows, cols = np.indices(gray.shape)
    cell_index = (rows // cell) * n_cells_x + (cols // cell)
    n_hist = n_cells_y * n_cells_x * n_bins
    hist = np.bincount(
        (cell_index * n_bins + bin_lo).ravel(),
        weights=weight_lo.ravel(),
        minlength=n_hist,
    )
    hist += np.bincount(
        (cell_index * n_bins + bin_hi).ravel(),
        weights=weight_hi.ravel(),
        minlength=n_hist,
    )
    hist = hist.reshape(n_cells_y, n_cells_x, n_bins)

    stride = params.block_stride
    side = params.block_side
    n_blocks_y = (n_cells_y - side) // stride + 1
    n_blocks_x = (n_cells_x - side) // stride + 1
    blocks = []
    for by in range(n_blocks_y):
        for bx in range(n_blocks_x):
            block = hist[
                by * stride : by * stride + side,
                bx * stride : bx * stride + side,
                :,
            ].ravel()
            blocks.append(_l2_hys(block, params.clip))
    return np.concatenate(blocks)


def _l2_hys(block: np.ndarray, clip: float) -> np.ndarray:
    norm = np.sqrt(np.dot(block, block))
    if norm > 0:
        block = block / norm
    block = np.minimum(block, clip)
    norm = np.sqrt(np.dot(block, block))
    if norm > 0:
        block = block / norm
    return block


def hog_dimension(height: int, width: int, params: HogParams) -> int:
    n_cells_y = height // params.cell_side
    n_cells_x = width // params.cell_side
    n_blocks_y = (n_cells_y - params.block_side) // params.block_stride + 1
    n_blocks_x = (n_cells_x - params.block_side) // params.block_stride + 1
    return n_blocks_y * n_blocks_x * params.block_side**2 * params.orientations
