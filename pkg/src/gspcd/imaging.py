"""Image rasters, superpixel tessellation, and per-region features.

A raster is stored channel-last with intensities in [0, 1]. Both images of a
pair are described on one shared tessellation so that region i means the same
pixel set before and after the event; features are per-region, per-channel
(mean, median, population variance) stacked into an N x M matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .formats import read_gspm, write_gspm


@dataclass
class ImageRaster:
    """A height x width x channels array of intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"raster must be 2-D or 3-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("raster contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("raster intensities must lie in [0, 1]")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class SuperpixelMap:
    """Pixel labels partitioning an image into n_regions nonempty regions.

    labels is height x width int32; every value in [0, n_regions) occurs at
    least once and nothing else occurs.
    """

    labels: np.ndarray
    n_regions: int = field(init=False)

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("labels must be a 2-D array")
        lab = lab.astype(np.int32)
        present = np.unique(lab)
        if present[0] != 0 or present[-1] != len(present) - 1:
            raise ValueError("labels must cover 0..n_regions-1 with no gaps")
        self.labels = lab
        self.n_regions = int(len(present))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def _grid_dims(height: int, width: int, n_target: int) -> tuple[int, int]:
    # Near-square blocks: split rows/cols so r*c is as close to n_target as
    # possible without exceeding the pixel grid.
    best = None
    for r in range(1, min(height, n_target) + 1):
        c = int(round(n_target / r))
        c = max(1, min(width, c))
        score = (abs(r * c - n_target), abs(r / height - c / width))
        if best is None or score < best[0]:
            best = (score, r, c)
    assert best is not None
    return best[1], best[2]


def _grid_labels(height: int, width: int, n_target: int) -> np.ndarray:
    rows, cols = _grid_dims(height, width, n_target)
    row_edges = np.linspace(0, height, rows + 1).round().astype(int)
    col_edges = np.linspace(0, width, cols + 1).round().astype(int)
    row_id = np.searchsorted(row_edges, np.arange(height), side="right") - 1
    col_id = np.searchsorted(col_edges, np.arange(width), side="right") - 1
    return (row_id[:, None] * cols + col_id[None, :]).astype(np.int32)


def _slic_labels(img: ImageRaster, n_target: int, seed: int, compactness: float = 0.1,
                 n_iter: int = 10) -> np.ndarray:
    """K-means superpixels in (color, position) space on a jittered grid seed.

    Deterministic for a fixed seed. Empty clusters are dropped during
    relabeling, so the realized region count can fall below n_target.
    """
    h, w = img.height, img.width
    step = max(1.0, np.sqrt(h * w / max(1, n_target)))
    rows = max(1, int(round(h / step)))
    cols = max(1, int(round(w / step)))
    rng = np.random.default_rng(seed)

    ys = (np.arange(rows) + 0.5) * (h / rows)
    xs = (np.arange(cols) + 0.5) * (w / cols)
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    cy = cy.ravel() + rng.uniform(-0.25, 0.25, cy.size) * (h / rows)
    cx = cx.ravel() + rng.uniform(-0.25, 0.25, cx.size) * (w / cols)
    cy = np.clip(cy, 0, h - 1)
    cx = np.clip(cx, 0, w - 1)
    centers_pos = np.stack([cy, cx], axis=1)
    centers_col = img.data[cy.round().astype(int), cx.round().astype(int), :]

    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    spatial_scale = (compactness / step) ** 2

    labels = np.full((h, w), -1, dtype=np.int32)
    for _ in range(n_iter):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for ci in range(len(centers_pos)):
            py, px = centers_pos[ci]
            y0, y1 = max(0, int(py - step)), min(h, int(py + step) + 1)
            x0, x1 = max(0, int(px - step)), min(w, int(px + step) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            patch = img.data[y0:y1, x0:x1, :]
            d_col = ((patch - centers_col[ci]) ** 2).sum(axis=2)
            d_pos = (yy[y0:y1, x0:x1] - py) ** 2 + (xx[y0:y1, x0:x1] - px) ** 2
            dist = d_col + spatial_scale * d_pos
            win = dist < best[y0:y1, x0:x1]
            best[y0:y1, x0:x1][win] = dist[win]
            labels[y0:y1, x0:x1][win] = ci

        # Pixels outside every search window: nearest center spatially.
        miss = labels < 0
        if miss.any():
            my, mx = np.nonzero(miss)
            d = (my[:, None] - centers_pos[:, 0]) ** 2 + (mx[:, None] - centers_pos[:, 1]) ** 2
            labels[my, mx] = np.argmin(d, axis=1)

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers_pos)).astype(float)
        occupied = counts > 0
        sum_y = np.bincount(flat, weights=yy.ravel(), minlength=len(centers_pos))
        sum_x = np.bincount(flat, weights=xx.ravel(), minlength=len(centers_pos))
        centers_pos[occupied, 0] = sum_y[occupied] / counts[occupied]
        centers_pos[occupied, 1] = sum_x[occupied] / counts[occupied]
        for ch in range(img.channels):
            sum_c = np.bincount(flat, weights=img.data[:, :, ch].ravel(),
                                minlength=len(centers_pos))
            centers_col[occupied, ch] = sum_c[occupied] / counts[occupied]

    # Drop empty clusters; keep labels dense.
    present, dense = np.unique(labels, return_inverse=True)
    return dense.reshape(h, w).astype(np.int32)


def segment_superpixels(img: ImageRaster, n_target: int, method: str = "grid",
                        seed: int = 0) -> SuperpixelMap:
    """Partition the raster into about n_target regions.

    method="grid" tiles the image with axis-aligned blocks whose sizes differ
    by at most one pixel per dimension; method="slic" runs the k-means
    iteration above. Both are deterministic for a fixed seed.
    """
    if n_target < 1 or n_target > img.height * img.width:
        raise ValueError(f"n_target={n_target} out of range for {img.height}x{img.width}")
    if method == "grid":
        labels = _grid_labels(img.height, img.width, n_target)
    elif method == "slic":
        labels = _slic_labels(img, n_target, seed)
    else:
        raise ValueError(f"unknown segmentation method {method!r}")
    return SuperpixelMap(labels)


def extract_features(img: ImageRaster, spmap: SuperpixelMap,
                     standardize: bool = False) -> np.ndarray:
    """Per-region features: (mean, median, population variance) per channel.

    Returns an (n_regions, 3 * channels) float64 matrix, feature order
    [mean_0, median_0, var_0, mean_1, ...]. With standardize=True each column
    is z-scored (population convention); constant columns are left at zero.
    """
    if spmap.shape != (img.height, img.width):
        raise ValueError("superpixel map does not match raster shape")
    n = spmap.n_regions
    flat_labels = spmap.labels.ravel()
    order = np.argsort(flat_labels, kind="stable")
    sorted_labels = flat_labels[order]
    boundaries = np.searchsorted(sorted_labels, np.arange(n + 1))

    feats = np.empty((n, 3 * img.channels), dtype=np.float64)
    for ch in range(img.channels):
        vals = img.data[:, :, ch].ravel()[order]
        counts = np.diff(boundaries).astype(float)
        sums = np.add.reduceat(vals, boundaries[:-1])
        means = sums / counts
        sq_sums = np.add.reduceat(vals * vals, boundaries[:-1])
        variances = np.maximum(sq_sums / counts - means**2, 0.0)
        medians = np.empty(n)
        for i in range(n):
            medians[i] = np.median(vals[boundaries[i]:boundaries[i + 1]])
        feats[:, 3 * ch + 0] = means
        feats[:, 3 * ch + 1] = medians
        feats[:, 3 * ch + 2] = variances

    if standardize:
        mu = feats.mean(axis=0)
        sd = feats.std(axis=0)
        keep = sd > 0
        feats = feats - mu
        feats[:, keep] /= sd[keep]
        feats[:, ~keep] = 0.0
    return feats


def reproject(values: np.ndarray, spmap: SuperpixelMap) -> np.ndarray:
    """Broadcast one value per region back to a per-pixel image."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1 or vals.shape[0] != spmap.n_regions:
        raise ValueError(f"expected {spmap.n_regions} per-region values, got shape {vals.shape}")
    return vals[spmap.labels]


# ---------------------------------------------------------------------------
# Raster I/O

def load_image(path: str | Path, channels: int = 1) -> ImageRaster:
    """Load a raster from PNG (8/16-bit gray or RGB) or GSPM.

    PNG intensities are divided by the bit-depth maximum. A GSPM matrix of
    shape (H, W*channels) is reshaped channel-interleaved; values already in
    [0, 1] are kept exact, anything else is min-max normalized per channel.
    """
    p = Path(path)
    if p.suffix.lower() == ".gspm":
        mat = read_gspm(p)
        h, wc = mat.shape
        if channels < 1 or wc % channels != 0:
            raise ValueError(f"{path}: {wc} columns not divisible by channels={channels}")
        arr = mat.reshape(h, wc // channels, channels)
        for ch in range(channels):
            band = arr[:, :, ch]
            lo, hi = band.min(), band.max()
            if lo < 0.0 or hi > 1.0:
                arr[:, :, ch] = (band - lo) / (hi - lo) if hi > lo else 0.0
        return ImageRaster(arr)

    with Image.open(p) as im:
        if im.mode in ("P", "LA"):
            im = im.convert("L")
        elif im.mode == "RGBA":
            im = im.convert("RGB")
        if im.mode in ("I", "I;16"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode in ("L", "RGB"):
            arr = np.asarray(im, dtype=np.float64) / 255.0
        else:
            raise ValueError(f"{path}: unsupported image mode {im.mode!r}")
    return ImageRaster(np.clip(arr, 0.0, 1.0))


def save_png(path: str | Path, values: np.ndarray) -> None:
    """Write a 2-D (gray) or 3-D (RGB) array as 8-bit PNG after min-max scaling."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    scaled = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
    q = np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)
    if q.ndim == 3 and q.shape[2] == 1:
        q = q[:, :, 0]
    Image.fromarray(q).save(path)


def save_raster(path: str | Path, raster: ImageRaster) -> None:
    """Write a raster as GSPM (exact, shape H x W*C)."""
    h, w, c = raster.data.shape
    write_gspm(path, raster.data.reshape(h, w * c))
