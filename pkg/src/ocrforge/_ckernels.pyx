# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

The float64 operation sequences here mirror the pure backend exactly
(see the _pykernels module docstring); the build disables FP contraction
so results stay bit-identical. Integer kernels are exact by nature.
"""

import numpy as np

from libc.math cimport floor, sqrt


def sauvola(const unsigned char[:, ::1] padded, Py_ssize_t height,
            Py_ssize_t width, Py_ssize_t wy, Py_ssize_t wx, double k):
    cdef Py_ssize_t ph = padded.shape[0]
    cdef Py_ssize_t pw = padded.shape[1]
    c1_np = np.zeros((ph + 1, pw + 1), dtype=np.int64)
    c2_np = np.zeros((ph + 1, pw + 1), dtype=np.int64)
    cdef long long[:, ::1] c1 = c1_np
    cdef long long[:, ::1] c2 = c2_np
    cdef Py_ssize_t i, j
    cdef long long px
    for i in range(ph):
        for j in range(pw):
            px = padded[i, j]
            c1[i + 1, j + 1] = px + c1[i, j + 1] + c1[i + 1, j] - c1[i, j]
            c2[i + 1, j + 1] = px * px + c2[i, j + 1] + c2[i + 1, j] - c2[i, j]
    out_np = np.empty((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_np
    cdef double cnt = <double> (wy * wx)
    cdef Py_ssize_t oy = wy // 2
    cdef Py_ssize_t ox = wx // 2
    cdef long long s1, s2
    cdef double m, v, t
    for i in range(height):
        for j in range(width):
            s1 = c1[i + wy, j + wx] - c1[i, j + wx] - c1[i + wy, j] + c1[i, j]
            s2 = c2[i + wy, j + wx] - c2[i, j + wx] - c2[i + wy, j] + c2[i, j]
            m = s1 / cnt
            v = s2 / cnt - m * m
            if v < 0.0:
                v = 0.0
            t = m * (1.0 + k * (sqrt(v) / 128.0 - 1.0))
            out[i, j] = 0 if (<double> padded[i + oy, j + ox]) < t else 255
    return out_np


def levenshtein(const int[::1] a, const int[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev_np = np.arange(m + 1, dtype=np.int64)
    cur_np = np.empty(m + 1, dtype=np.int64)
    cdef long long[::1] prev = prev_np
    cdef long long[::1] cur = cur_np
    cdef long long[::1] tmp
    cdef Py_ssize_t i, j
    cdef long long best, cand
    cdef int ai
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur[0] = i
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if b[j - 1] == ai else 1)
            cand = prev[j] + 1
            if cand < best:
                best = cand
            cand = cur[j - 1] + 1
            if cand < best:
                best = cand
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])


def align(const int[::1] a, const int[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    d_np = np.empty((n + 1, m + 1), dtype=np.int64)
    cdef long long[:, ::1] d = d_np
    cdef Py_ssize_t i, j
    cdef long long best, cand
    cdef int ai
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        d[i, 0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (0 if b[j - 1] == ai else 1)
            cand = d[i - 1, j] + 1
            if cand < best:
                best = cand
            cand = d[i, j - 1] + 1
            if cand < best:
                best = cand
            d[i, j] = best
    ops_np = np.empty(n + m, dtype=np.uint8)
    cdef unsigned char[::1] ops = ops_np
    cdef Py_ssize_t pos = n + m
    i = n
    j = m
    # tie preference: match > substitution > deletion > insertion
    while i > 0 or j > 0:
        pos -= 1
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and d[i, j] == d[i - 1, j - 1]:
            ops[pos] = 0
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            ops[pos] = 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            ops[pos] = 2
            i -= 1
        else:
            ops[pos] = 3
            j -= 1
    return ops_np[pos:].copy()


def warp_bilinear_clamp(const double[:, ::1] img, const double[:, ::1] ys,
                        const double[:, ::1] xs):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t oh = ys.shape[0]
    cdef Py_ssize_t ow = ys.shape[1]
    out_np = np.empty((oh, ow), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double ymax = <double> (h - 1)
    cdef double xmax = <double> (w - 1)
    cdef double y, x, y0f, x0f, fy, fx, v00, v01, v10, v11, top, bot
    cdef Py_ssize_t i, j, y0, x0, y1, x1
    for i in range(oh):
        for j in range(ow):
            y = ys[i, j]
            if y < 0.0:
                y = 0.0
            elif y > ymax:
                y = ymax
            x = xs[i, j]
            if x < 0.0:
                x = 0.0
            elif x > xmax:
                x = xmax
            y0f = floor(y)
            x0f = floor(x)
            fy = y - y0f
            fx = x - x0f
            y0 = <Py_ssize_t> y0f
            x0 = <Py_ssize_t> x0f
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            v00 = img[y0, x0]
            v01 = img[y0, x1]
            v10 = img[y1, x0]
            v11 = img[y1, x1]
            top = v00 * (1.0 - fx) + v01 * fx
            bot = v10 * (1.0 - fx) + v11 * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out_np


def warp_bilinear_fill(const double[:, ::1] img, const double[:, ::1] ys,
                       const double[:, ::1] xs, double fill):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t oh = ys.shape[0]
    cdef Py_ssize_t ow = ys.shape[1]
    out_np = np.empty((oh, ow), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double y, x, y0f, x0f, fy, fx, v00, v01, v10, v11, top, bot
    cdef long long y0, x0, y1, x1
    cdef Py_ssize_t i, j
    for i in range(oh):
        for j in range(ow):
            y = ys[i, j]
            x = xs[i, j]
            y0f = floor(y)
            x0f = floor(x)
            fy = y - y0f
            fx = x - x0f
            y0 = <long long> y0f
            x0 = <long long> x0f
            y1 = y0 + 1
            x1 = x0 + 1
            v00 = img[y0, x0] if 0 <= y0 < h and 0 <= x0 < w else fill
            v01 = img[y0, x1] if 0 <= y0 < h and 0 <= x1 < w else fill
            v10 = img[y1, x0] if 0 <= y1 < h and 0 <= x0 < w else fill
            v11 = img[y1, x1] if 0 <= y1 < h and 0 <= x1 < w else fill
            top = v00 * (1.0 - fx) + v01 * fx
            bot = v10 * (1.0 - fx) + v11 * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out_np
