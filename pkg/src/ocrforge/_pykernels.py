"""Pure NumPy/Python implementations of the hot kernels.

This module defines the reference semantics; the compiled backend in
``_ckernels.pyx`` promises bit-identical results. To keep that promise the
float64 operation *sequence* below is binding for both backends:

sauvola, per pixel (window sums are exact int64):
    m = s1 / cnt
    v = s2 / cnt - m * m
    v = max(v, 0.0)
    t = m * (1.0 + k * (sqrt(v) / 128.0 - 1.0))
    out = 0 if px < t else 255

bilinear warps, per pixel:
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    out = top * (1.0 - fy) + bot * fy

levenshtein / align work in integers, so any evaluation order is exact;
the alignment traceback preference (match > substitution > deletion >
insertion) is binding.
"""

from __future__ import annotations

import numpy as np

OP_MATCH = 0
OP_SUB = 1
OP_DEL = 2
OP_INS = 3


def _window_sums(padded: np.ndarray, wy: int, wx: int) -> np.ndarray:
    """Exact int64 sums of every wy*wx window fully inside the padded image."""
    c = padded.cumsum(axis=0, dtype=np.int64).cumsum(axis=1, dtype=np.int64)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[wy:, wx:] - c[:-wy, wx:] - c[wy:, :-wx] + c[:-wy, :-wx]


def sauvola(padded: np.ndarray, height: int, width: int, wy: int, wx: int,
            k: float) -> np.ndarray:
    """Local-threshold binarization over a mirror-padded uint8 image.

    `padded` has shape (height + wy - 1, width + wx - 1) so every output
    pixel sees a full wy*wx window.
    """
    p = padded.astype(np.int64)
    s1 = _window_sums(p, wy, wx)
    s2 = _window_sums(p * p, wy, wx)
    cnt = float(wy * wx)
    m = s1 / cnt
    v = s2 / cnt - m * m
    np.maximum(v, 0.0, out=v)
    t = m * (1.0 + k * (np.sqrt(v) / 128.0 - 1.0))
    core = padded[wy // 2:wy // 2 + height, wx // 2:wx // 2 + width]
    return np.where(core.astype(np.float64) < t, 0, 255).astype(np.uint8)


def levenshtein(a: np.ndarray, b: np.ndarray) -> int:
    """Edit distance with unit costs over int32 code-point arrays."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    offsets = np.arange(m + 1, dtype=np.int64)
    prev = offsets.copy()
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cost = (b != a[i - 1]).astype(np.int64)
        cur[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + cost, out=cur[1:])
        # fold in the insertion chain: cur[j] = min_{k<=j} cur[k] + (j - k)
        cur -= offsets
        np.minimum.accumulate(cur, out=cur)
        cur += offsets
        prev, cur = cur, prev
    return int(prev[m])


def _dp_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = len(a), len(b)
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    offsets = np.arange(m + 1, dtype=np.int64)
    d[0] = offsets
    for i in range(1, n + 1):
        prev = d[i - 1]
        cur = d[i]
        cost = (b != a[i - 1]).astype(np.int64)
        cur[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + cost, out=cur[1:])
        cur -= offsets
        np.minimum.accumulate(cur, out=cur)
        cur += offsets
    return d


def align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Optimal edit script as uint8 opcodes (match/sub/del/ins).

    Ties in the traceback prefer match, then substitution, then deletion,
    then insertion, which makes the script deterministic.
    """
    d = _dp_matrix(a, b)
    ops = []
    i, j = len(a), len(b)
    while i > 0 or j > 0:
        here = d[i, j]
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and here == d[i - 1, j - 1]:
            ops.append(OP_MATCH)
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and here == d[i - 1, j - 1] + 1:
            ops.append(OP_SUB)
            i -= 1
            j -= 1
        elif i > 0 and here == d[i - 1, j] + 1:
            ops.append(OP_DEL)
            i -= 1
        else:
            ops.append(OP_INS)
            j -= 1
    ops.reverse()
    return np.array(ops, dtype=np.uint8)


def warp_bilinear_clamp(img: np.ndarray, ys: np.ndarray,
                        xs: np.ndarray) -> np.ndarray:
    """Backward bilinear warp; sample coordinates are clamped to the image."""
    h, w = img.shape
    ys = np.clip(ys, 0.0, float(h - 1))
    xs = np.clip(xs, 0.0, float(w - 1))
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    fy = ys - y0f
    fx = xs - x0f
    y0 = y0f.astype(np.intp)
    x0 = x0f.astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    v00 = img[y0, x0]
    v01 = img[y0, x1]
    v10 = img[y1, x0]
    v11 = img[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def warp_bilinear_fill(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                       fill: float) -> np.ndarray:
    """Backward bilinear warp; samples outside the image read `fill`."""
    h, w = img.shape
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    fy = ys - y0f
    fx = xs - x0f
    y0 = y0f.astype(np.int64)
    x0 = x0f.astype(np.int64)
    y1 = y0 + 1
    x1 = x0 + 1

    def sample(yi, xi):
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        v = np.full(yi.shape, fill, dtype=np.float64)
        v[inside] = img[yi[inside], xi[inside]]
        return v

    v00 = sample(y0, x0)
    v01 = sample(y0, x1)
    v10 = sample(y1, x0)
    v11 = sample(y1, x1)
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy
