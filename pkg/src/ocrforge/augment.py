"""Stochastic line-image augmentation operators and plan execution.

Every operator takes (LineImage, params, numpy Generator) and returns a new
LineImage; inputs are never mutated. Draw order within each operator is part
of its contract (documented per docstring) so a seeded Generator reproduces
the same output everywhere. Zero-strength parameters return an identical
copy of the input.
"""

from __future__ import annotations

import json
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from ocrforge import kernels
from ocrforge.lineimg import (GRAYSCALE, IMAGE_SUFFIXES, LineImage,
                              brightness_quantile, load_line, save_line, to_u8)


def _require_grayscale(img: LineImage, op: str) -> None:
    if img.depth != GRAYSCALE:
        raise ValueError(f"{op} needs a grayscale input")


def _copy(img: LineImage) -> LineImage:
    return LineImage(img.pixels.copy(), img.depth)


@dataclass(frozen=True)
class HiResDistortParams:
    """Smooth random warp: sigma = smoothing stddev, maxdelta = peak shift."""

    sigma: float
    maxdelta: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.maxdelta < 0:
            raise ValueError("maxdelta must be >= 0")


@dataclass(frozen=True)
class LoResDistortParams:
    """Grid warp: num_steps cells per axis, cell sizes jittered by +-limit."""

    num_steps: int
    distort_limit: float

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not 0.0 <= self.distort_limit < 1.0:
            raise ValueError("distort_limit must be in [0, 1)")


@dataclass(frozen=True)
class NoiseParams:
    """Additive Gaussian noise; variance drawn per image from [var_min, var_max]."""

    mu: float
    var_min: float
    var_max: float

    def __post_init__(self):
        if self.var_min < 0 or self.var_max < self.var_min:
            raise ValueError("need 0 <= var_min <= var_max")


@dataclass(frozen=True)
class BrightnessContrastParams:
    """Pixel remap px * alpha + beta * mean(img); limits bound alpha and beta."""

    brightness_limit: float
    contrast_limit: float

    def __post_init__(self):
        if not 0.0 <= self.brightness_limit <= 1.0:
            raise ValueError("brightness_limit must be in [0, 1]")
        if not 0.0 <= self.contrast_limit <= 1.0:
            raise ValueError("contrast_limit must be in [0, 1]")


@dataclass(frozen=True)
class BlotchParams:
    """Ink and paper blobs: seed rate `amount`, blob diameter ~ `scale`."""

    amount: float
    scale: float
    fg_quantile: float = 0.75
    bg_quantile: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.amount <= 0.01:
            raise ValueError("amount must be in [0, 0.01]")
        if self.scale < 1.0:
            raise ValueError("scale must be >= 1")


def displacement_field(shape: tuple[int, int], params: HiResDistortParams,
                       rng: np.random.Generator) -> np.ndarray:
    """Two smoothed white-noise channels (dy, dx), each peaking at maxdelta.

    Draw order: one standard-normal block of shape (2, h, w). Each channel is
    Gaussian-smoothed, divided by its own max |value|, then scaled by
    maxdelta, so the largest displacement equals maxdelta exactly.
    """
    field = rng.standard_normal((2, *shape))
    field = gaussian_filter(field, sigma=(0.0, params.sigma, params.sigma))
    for c in range(2):
        peak = float(np.max(np.abs(field[c])))
        if peak > 0.0:
            field[c] /= peak
    field *= params.maxdelta
    return field


def distort_highres(img: LineImage, params: HiResDistortParams,
                    rng: np.random.Generator) -> LineImage:
    """Warp by a smooth random displacement field (wavy local stretching)."""
    _require_grayscale(img, "distort_highres")
    if params.maxdelta == 0:
        return _copy(img)
    d = displacement_field(img.pixels.shape, params, rng)
    h, w = img.pixels.shape
    ys = np.arange(h, dtype=np.float64)[:, None] + d[0]
    xs = np.arange(w, dtype=np.float64)[None, :] + d[1]
    out = kernels.warp_bilinear_clamp(img.pixels.astype(np.float64), ys, xs)
    return LineImage(to_u8(out), GRAYSCALE)


def grid_axis_positions(span: float, num_steps: int, distort_limit: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Distorted vertex positions along one axis, endpoints pinned.

    Each of the num_steps cells is stretched by a factor drawn uniformly
    from [1 - limit, 1 + limit]; cumulative positions are rescaled to end
    exactly at `span`. For any limit < 1 the result is strictly increasing
    and inside [0, span], so no vertex ever crosses another or leaves the
    image.
    """
    stretch = 1.0 + rng.uniform(-distort_limit, distort_limit, size=num_steps)
    pos = np.concatenate(([0.0], np.cumsum(stretch)))
    pos *= span / pos[-1]
    pos[-1] = span  # the rescale can land one ulp off; the pin must be exact
    return pos


def distort_lowres(img: LineImage, params: LoResDistortParams,
                   rng: np.random.Generator) -> LineImage:
    """Warp a coarse num_steps x num_steps grid, interpolating between cells.

    Draw order: x-axis cell stretches first, then y-axis. num_steps = 1
    degenerates to the identity (both endpoints are pinned).
    """
    _require_grayscale(img, "distort_lowres")
    if params.distort_limit == 0:
        return _copy(img)
    h, w = img.pixels.shape
    sx = grid_axis_positions(float(w - 1), params.num_steps,
                             params.distort_limit, rng)
    sy = grid_axis_positions(float(h - 1), params.num_steps,
                             params.distort_limit, rng)
    tx = np.linspace(0.0, float(w - 1), params.num_steps + 1)
    ty = np.linspace(0.0, float(h - 1), params.num_steps + 1)
    xs_1d = np.interp(np.arange(w, dtype=np.float64), tx, sx)
    ys_1d = np.interp(np.arange(h, dtype=np.float64), ty, sy)
    ys = np.broadcast_to(ys_1d[:, None], (h, w))
    xs = np.broadcast_to(xs_1d[None, :], (h, w))
    out = kernels.warp_bilinear_clamp(img.pixels.astype(np.float64), ys, xs)
    return LineImage(to_u8(out), GRAYSCALE)


def add_gaussian_noise(img: LineImage, params: NoiseParams,
                       rng: np.random.Generator) -> LineImage:
    """Add per-pixel N(mu, sigma) noise; sigma^2 ~ U[var_min, var_max] per image.

    Draw order: the variance first, then the noise block.
    """
    _require_grayscale(img, "add_gaussian_noise")
    if params.mu == 0 and params.var_max == 0:
        return _copy(img)
    var = rng.uniform(params.var_min, params.var_max)
    noise = rng.normal(params.mu, math.sqrt(var), size=img.pixels.shape)
    return LineImage(to_u8(img.pixels.astype(np.float64) + noise), GRAYSCALE)


def random_brightness_contrast(img: LineImage,
                               params: BrightnessContrastParams,
                               rng: np.random.Generator) -> LineImage:
    """Remap px -> px * alpha + beta * mean(img), clamped to [0, 255].

    alpha ~ U[1 - contrast_limit, 1 + contrast_limit] scales contrast;
    beta ~ U[-brightness_limit, +brightness_limit] shifts brightness in
    units of the image's own mean intensity. Draw order: alpha, then beta.
    """
    _require_grayscale(img, "random_brightness_contrast")
    if params.brightness_limit == 0 and params.contrast_limit == 0:
        return _copy(img)
    alpha = rng.uniform(1.0 - params.contrast_limit, 1.0 + params.contrast_limit)
    beta = rng.uniform(-params.brightness_limit, params.brightness_limit)
    out = (img.pixels.astype(np.float64) * alpha
           + beta * float(img.pixels.mean()))
    return LineImage(to_u8(out), GRAYSCALE)


@lru_cache(maxsize=32)
def _isolated_seed_level(scale: float) -> float:
    # threshold an isolated smoothed seed reaches at radius scale/2, taken
    # from the discrete impulse response so blob diameters track `scale`
    r = int(math.ceil(4.0 * scale))
    patch = np.zeros((2 * r + 1, 2 * r + 1))
    patch[r, r] = 1.0
    resp = gaussian_filter(patch, sigma=scale)
    return float(resp[r, r + int(round(scale / 2.0))])


def blob_mask(shape: tuple[int, int], amount: float, scale: float,
              rng: np.random.Generator) -> np.ndarray:
    """Boolean blob mask grown from Bernoulli(amount) seed pixels.

    Seeds are smoothed with a Gaussian of stddev `scale` and thresholded at
    the level an isolated seed reaches at radius scale/2: a lone seed grows
    to a blob of diameter about `scale`, nearby seeds merge. The threshold
    sits on top of the field's mean (= amount); without that offset the
    collective tail of all seeds would inflate every blob.
    """
    seeds = rng.random(shape) < amount
    if not seeds.any():
        return np.zeros(shape, dtype=bool)
    smooth = gaussian_filter(seeds.astype(np.float64), sigma=scale)
    return smooth > _isolated_seed_level(scale) + amount


def add_blotches(img: LineImage, params: BlotchParams,
                 rng: np.random.Generator) -> LineImage:
    """Stamp two families of random blobs onto the line.

    Foreground blobs take the input's fg_quantile brightness, background
    blobs its bg_quantile brightness; background is painted second and wins
    overlaps. Draw order: foreground mask, then background mask.
    """
    _require_grayscale(img, "add_blotches")
    if params.amount == 0:
        return _copy(img)
    fg = blob_mask(img.pixels.shape, params.amount, params.scale, rng)
    bg = blob_mask(img.pixels.shape, params.amount, params.scale, rng)
    out = img.pixels.copy()
    out[fg] = brightness_quantile(img.pixels, params.fg_quantile)
    out[bg] = brightness_quantile(img.pixels, params.bg_quantile)
    return LineImage(out, GRAYSCALE)


Operator = Callable[[LineImage, Any, np.random.Generator], LineImage]

OPERATORS: dict[str, tuple[type, Operator]] = {
    "distort_highres": (HiResDistortParams, distort_highres),
    "distort_lowres": (LoResDistortParams, distort_lowres),
    "add_gaussian_noise": (NoiseParams, add_gaussian_noise),
    "random_brightness_contrast": (BrightnessContrastParams,
                                   random_brightness_contrast),
    "add_blotches": (BlotchParams, add_blotches),
}


@dataclass
class AugmentationPlan:
    """Ordered operator pipeline plus the corpus growth ratio.

    ratio is a percentage: 200 adds ceil(2.0 * n) new lines to n originals.
    """

    ops: list[tuple[str, Any]]
    ratio: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.ratio < 0:
            raise ValueError("ratio must be >= 0")
        for name, params in self.ops:
            if name not in OPERATORS:
                raise ValueError(f"unknown operator {name!r}")
            want = OPERATORS[name][0]
            if not isinstance(params, want):
                raise ValueError(f"operator {name!r} wants {want.__name__} "
                                 f"params, got {type(params).__name__}")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "ratio": self.ratio,
            "seed": self.seed,
            "ops": [{"op": name, "params": vars(params)}
                    for name, params in self.ops],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AugmentationPlan":
        ops = []
        for entry in doc.get("ops", []):
            name = entry["op"]
            if name not in OPERATORS:
                raise ValueError(f"unknown operator {name!r}")
            ops.append((name, OPERATORS[name][0](**entry["params"])))
        return cls(ops=ops, ratio=doc.get("ratio", 0.0), seed=doc.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AugmentationPlan":
        return cls.from_dict(json.loads(text))


def load_plan(path: str | Path) -> AugmentationPlan:
    return AugmentationPlan.from_json(Path(path).read_text(encoding="utf-8"))


def save_plan(plan: AugmentationPlan, path: str | Path) -> None:
    Path(path).write_text(plan.to_json(), encoding="utf-8")


def _substream(seed: int, out_index: int) -> np.random.Generator:
    # one independent stream per output line; worker count can't change it
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(out_index,)))


def _make_augmented(lines: Sequence[LineImage], plan: AugmentationPlan,
                    seed: int, out_index: int) -> tuple[int, LineImage]:
    rng = _substream(seed, out_index)
    src_index = int(rng.integers(len(lines)))
    img = lines[src_index]
    for name, params in plan.ops:
        img = OPERATORS[name][1](img, params, rng)
    return src_index, img


def plan_output_count(n_lines: int, ratio: float) -> int:
    """New lines created for n originals at the given percentage ratio."""
    return math.ceil(ratio / 100.0 * n_lines)


def apply_plan(lines: Sequence[LineImage], plan: AugmentationPlan,
               seed: int | None = None, workers: int = 1) -> list[LineImage]:
    """Run the plan: originals first, then ceil(ratio/100 * n) new lines.

    Each output index gets its own RNG substream keyed on (seed, index); the
    stream picks the source line, then feeds the operators in plan order.
    Results are therefore identical for any worker count.
    """
    if len(lines) == 0:
        raise ValueError("empty dataset")
    if seed is None:
        seed = plan.seed if plan.seed is not None else 0
    n_new = plan_output_count(len(lines), plan.ratio)
    indices = range(n_new)
    if workers <= 1:
        made = [_make_augmented(lines, plan, seed, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            made = list(pool.map(
                lambda i: _make_augmented(lines, plan, seed, i), indices))
    return list(lines) + [img for _, img in made]


def augment_directory(in_dir: str | Path, out_dir: str | Path,
                      plan: AugmentationPlan, seed: int | None = None,
                      workers: int = 1) -> int:
    """Augment every line image in a directory, carrying transcripts along.

    Originals are copied byte-for-byte; new lines are written as
    `aug<index>_<source-stem>.png` with the source's `.gt.txt` duplicated.
    Returns the number of new lines written.
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(p for p in in_dir.iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ValueError("empty dataset")
    if seed is None:
        seed = plan.seed if plan.seed is not None else 0
    lines = [load_line(p) for p in paths]

    for p in paths:
        shutil.copyfile(p, out_dir / p.name)
        gt = p.with_name(p.stem + ".gt.txt")
        if gt.exists():
            shutil.copyfile(gt, out_dir / gt.name)

    n_new = plan_output_count(len(lines), plan.ratio)
    indices = range(n_new)
    if workers <= 1:
        made = [_make_augmented(lines, plan, seed, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            made = list(pool.map(
                lambda i: _make_augmented(lines, plan, seed, i), indices))
    for i, (src_index, img) in enumerate(made):
        src = paths[src_index]
        stem = f"aug{i:05d}_{src.stem}"
        save_line(img, out_dir / f"{stem}.png")
        gt = src.with_name(src.stem + ".gt.txt")
        if gt.exists():
            shutil.copyfile(gt, out_dir / f"{stem}.gt.txt")
    return n_new
