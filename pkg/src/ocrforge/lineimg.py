"""Text-line image handling: loading, deskewing, rescaling, binarization.

A line image is a single-channel uint8 raster. All operations are pure
(inputs are never mutated) and deterministic: identical inputs produce
bit-identical outputs. Heights are the only dimension ever rescaled;
widths pass through untouched so glyph proportions survive.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ocrforge import kernels

GRAYSCALE = "grayscale"
BINARY = "binary"

SAUVOLA_K = 0.2
SAUVOLA_DYNAMIC_RANGE = 128.0

IMAGE_SUFFIXES = (".png", ".pgm")


class BlankLineError(ValueError):
    """Raised when an operation needs ink but the image has none."""


class DegenerateImageWarning(UserWarning):
    """Signals a no-contrast input where global thresholding is meaningless."""


@dataclass
class LineImage:
    """Single-channel text-line raster plus its depth tag.

    Args:
        pixels: 2-D uint8 array, indexed [row, column].
        depth: GRAYSCALE, or BINARY when every pixel is 0 or 255.
    """

    pixels: np.ndarray
    depth: str = GRAYSCALE

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"degenerate raster shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {px.dtype}")
        if self.depth not in (GRAYSCALE, BINARY):
            raise ValueError(f"unknown depth {self.depth!r}")
        if self.depth == BINARY and not bool(((px == 0) | (px == 255)).all()):
            raise ValueError("binary depth requires all pixels in {0, 255}")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Baseline:
    """Writing-line fit y = slope * x + intercept, in pixel coordinates."""

    slope: float
    intercept: float

    def __post_init__(self):
        if not abs(self.slope) < 1.0:
            raise ValueError(f"baseline slope {self.slope} not in (-1, 1); "
                             "lines steeper than 45 degrees are rejected upstream")


@dataclass(frozen=True)
class InputConfig:
    """Network input geometry: target line height plus optional binarization."""

    name: str
    target_height: int
    binarize: bool

    def __post_init__(self):
        if self.target_height < 1:
            raise ValueError("target_height must be positive")
        known = _INPUT_TABLE.get(self.name)
        if known is not None and known != (self.target_height, self.binarize):
            raise ValueError(f"config {self.name!r} must have "
                             f"target_height={known[0]}, binarize={known[1]}")


_INPUT_TABLE = {
    "gray48": (48, False),
    "bin48": (48, True),
    "gray64": (64, False),
    "bin64": (64, True),
}

INPUT_CONFIGS = {
    name: InputConfig(name, height, binarize)
    for name, (height, binarize) in _INPUT_TABLE.items()
}


def input_config(name: str) -> InputConfig:
    try:
        return INPUT_CONFIGS[name]
    except KeyError:
        raise ValueError(f"unknown input config {name!r}; "
                         f"choose one of {sorted(INPUT_CONFIGS)}") from None


def load_line(path: str | Path) -> LineImage:
    """Read a PNG or PGM file as a grayscale line image."""
    with Image.open(path) as im:
        return LineImage(np.asarray(im.convert("L"), dtype=np.uint8))


def save_line(img: LineImage, path: str | Path) -> None:
    """Write a line image as PNG or PGM, chosen by the file suffix."""
    path = Path(path)
    if path.suffix.lower() not in IMAGE_SUFFIXES:
        raise ValueError(f"unsupported image suffix {path.suffix!r}")
    Image.fromarray(img.pixels, mode="L").save(path)


def read_baseline_sidecar(image_path: str | Path) -> Baseline | None:
    """Load `<image>.baseline.json` next to an image, if present."""
    sidecar = Path(image_path).with_suffix(".baseline.json")
    if not sidecar.exists():
        return None
    doc = json.loads(sidecar.read_text(encoding="utf-8"))
    return Baseline(float(doc["slope"]), float(doc["intercept"]))


def write_baseline_sidecar(baseline: Baseline, image_path: str | Path) -> Path:
    sidecar = Path(image_path).with_suffix(".baseline.json")
    doc = {"slope": baseline.slope, "intercept": baseline.intercept}
    sidecar.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def to_u8(values: np.ndarray) -> np.ndarray:
    """Round float intensities to uint8, clamping into [0, 255]."""
    return np.rint(np.clip(values, 0.0, 255.0)).astype(np.uint8)


def brightness_quantile(pixels: np.ndarray, q: float) -> int:
    """Intensity at rank floor(q * (n - 1)) of the sorted pixels."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile must be in [0, 1]")
    flat = np.sort(pixels, axis=None)
    return int(flat[int(math.floor(q * (flat.size - 1)))])


def rescale_height(img: LineImage, target_height: int) -> LineImage:
    """Rescale vertically to `target_height`; width is untouched.

    Downscaling area-averages source rows (each output row is the exact
    fractional-coverage mean of the rows it spans), upscaling interpolates
    bilinearly between row centers. Equal heights return an identical copy.
    """
    if target_height < 1:
        raise ValueError("target_height must be positive")
    h = img.height
    if target_height == h:
        return LineImage(img.pixels.copy(), GRAYSCALE)
    src = img.pixels.astype(np.float64)
    if target_height < h:
        out = _area_reduce_rows(src, target_height)
    else:
        out = _bilinear_rows(src, target_height)
    return LineImage(to_u8(out), GRAYSCALE)


def _area_reduce_rows(src: np.ndarray, hout: int) -> np.ndarray:
    hin = src.shape[0]
    scale = hin / hout
    out = np.empty((hout, src.shape[1]), dtype=np.float64)
    for r in range(hout):
        lo = r * scale
        hi = (r + 1) * scale
        i0 = int(math.floor(lo))
        i1 = min(int(math.ceil(hi)), hin)
        rows = np.arange(i0, i1, dtype=np.float64)
        cover = np.minimum(rows + 1.0, hi) - np.maximum(rows, lo)
        np.clip(cover, 0.0, None, out=cover)
        out[r] = (cover[:, None] * src[i0:i1]).sum(axis=0) / (hi - lo)
    return out


def _bilinear_rows(src: np.ndarray, hout: int) -> np.ndarray:
    hin = src.shape[0]
    scale = hin / hout
    pos = (np.arange(hout, dtype=np.float64) + 0.5) * scale - 0.5
    np.clip(pos, 0.0, float(hin - 1), out=pos)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, hin - 1)
    f = (pos - i0)[:, None]
    return src[i0] * (1.0 - f) + src[i1] * f


def default_sauvola_window(height: int) -> int:
    """Half the line height less one, stepped down to odd, floored at 3."""
    window = height // 2 - 1
    if window % 2 == 0:
        window -= 1
    return max(window, 3)


def _clamp_window(window: int, dim: int) -> int:
    if window <= dim:
        return window
    return dim if dim % 2 == 1 else dim - 1


def binarize_sauvola(img: LineImage, window: int | None = None,
                     k: float = SAUVOLA_K) -> LineImage:
    """Local-threshold binarization with per-window mean/stddev statistics.

    Each pixel is compared against t = m * (1 + k * (s / 128 - 1)) where m
    and s are the mean and standard deviation of its window; darker-than-t
    maps to 0, the rest to 255. The image border is mirror-padded so every
    window is full-size.

    Args:
        img: grayscale input.
        window: odd window edge >= 3; defaults to default_sauvola_window(height).
            Windows larger than an image dimension are clamped to it.
        k: sensitivity; 0.2 unless a project has reason to retune.
    """
    if img.depth != GRAYSCALE:
        raise ValueError("binarize_sauvola needs a grayscale input")
    if window is None:
        window = default_sauvola_window(img.height)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    wy = _clamp_window(window, img.height)
    wx = _clamp_window(window, img.width)
    padded = np.pad(img.pixels, ((wy // 2, wy // 2), (wx // 2, wx // 2)),
                    mode="symmetric")
    out = kernels.sauvola(padded, img.height, img.width, wy, wx, k)
    return LineImage(out, BINARY)


def otsu_threshold(pixels: np.ndarray) -> int | None:
    """Global cut T maximizing between-class variance; px < T maps to 0.

    Ties pick the lowest threshold. Returns None when the histogram has a
    single occupied bin (no split exists).
    """
    hist = np.bincount(pixels.ravel(), minlength=256).astype(np.float64)
    total = float(pixels.size)
    w0 = np.cumsum(hist)
    sum0 = np.cumsum(hist * np.arange(256, dtype=np.float64))
    total_sum = sum0[-1]
    best_split = -1
    best_var = -1.0
    for s in range(255):
        n0 = w0[s]
        n1 = total - n0
        if n0 == 0.0 or n1 == 0.0:
            continue
        mu0 = sum0[s] / n0
        mu1 = (total_sum - sum0[s]) / n1
        var = n0 * n1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_split = s
    if best_split < 0:
        return None
    return best_split + 1


def binarize_otsu(img: LineImage) -> LineImage:
    """Global-threshold binarization; degenerate inputs warn and map to white."""
    if img.depth != GRAYSCALE:
        raise ValueError("binarize_otsu needs a grayscale input")
    t = otsu_threshold(img.pixels)
    if t is None:
        warnings.warn("single-valued image, no global threshold exists",
                      DegenerateImageWarning, stacklevel=2)
        out = np.full_like(img.pixels, 255)
    else:
        out = np.where(img.pixels < t, 0, 255).astype(np.uint8)
    return LineImage(out, BINARY)


def estimate_baseline(img: LineImage) -> Baseline:
    """Fit the writing line through intensity-weighted column centroids.

    Ink is every pixel strictly darker than the median brightness; each ink
    column contributes its darkness-weighted row centroid, and a least-squares
    line through (column, centroid) gives the slope/intercept.
    """
    px = img.pixels
    ink_cut = brightness_quantile(px, 0.5)
    ink = px < ink_cut
    col_has_ink = ink.any(axis=0)
    cols = np.flatnonzero(col_has_ink)
    if cols.size == 0:
        raise BlankLineError("blank line")
    weights = np.where(ink, 255.0 - px, 0.0)
    rows = np.arange(img.height, dtype=np.float64)[:, None]
    centroids = (weights * rows).sum(axis=0)[cols] / weights.sum(axis=0)[cols]
    if cols.size == 1:
        return Baseline(0.0, float(centroids[0]))
    slope, intercept = np.polyfit(cols.astype(np.float64), centroids, 1)
    return Baseline(float(slope), float(intercept))


def deskew(img: LineImage, baseline: Baseline) -> LineImage:
    """Shear columns vertically so the baseline comes out horizontal.

    Column x is shifted by -slope * x; the canvas grows just enough to keep
    every sheared pixel, and exposed canvas takes the 0.95 brightness
    quantile of the input (background, not ink). Only the slope matters
    here; the intercept merely records where the flattened baseline sits.
    A zero-slope baseline returns a pixel-identical copy.
    """
    if img.depth != GRAYSCALE:
        raise ValueError("deskew needs a grayscale input")
    slope = baseline.slope
    h, w = img.pixels.shape
    grow = int(math.ceil(abs(slope) * (w - 1)))
    pad_top = int(math.ceil(max(0.0, slope * (w - 1))))
    fill = float(brightness_quantile(img.pixels, 0.95))
    ys = (np.arange(h + grow, dtype=np.float64)[:, None] - pad_top
          + slope * np.arange(w, dtype=np.float64)[None, :])
    xs = np.broadcast_to(np.arange(w, dtype=np.float64), ys.shape)
    out = kernels.warp_bilinear_fill(img.pixels.astype(np.float64), ys, xs, fill)
    return LineImage(to_u8(out), GRAYSCALE)


def prepare(img: LineImage, config: InputConfig,
            baseline: Baseline | None = None) -> LineImage:
    """Deskew (when a baseline is given), rescale, then binarize if asked.

    This is the full preprocessing path from a raw line to network input.
    """
    out = img
    if baseline is not None:
        out = deskew(out, baseline)
    out = rescale_height(out, config.target_height)
    if config.binarize:
        out = binarize_sauvola(out)
    return out
