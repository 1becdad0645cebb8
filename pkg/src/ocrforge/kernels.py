"""Kernel backend selection and dtype plumbing.

The compiled Cython backend is used when its extension was built; setting
the environment variable OCRFORGE_PURE=1 (before import) forces the
NumPy/Python fallback. Both backends produce bit-identical results; the
contract is spelled out in ``_pykernels`` and enforced by
tests/test_kernels.py.
"""

from __future__ import annotations

import os

import numpy as np

from ocrforge import _pykernels

OP_MATCH = _pykernels.OP_MATCH
OP_SUB = _pykernels.OP_SUB
OP_DEL = _pykernels.OP_DEL
OP_INS = _pykernels.OP_INS

if os.environ.get("OCRFORGE_PURE") == "1":
    _impl = _pykernels
else:
    try:
        from ocrforge import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels


def backend() -> str:
    """Name of the active backend: 'compiled' or 'pure'."""
    return "pure" if _impl is _pykernels else "compiled"


def str_to_codes(s: str) -> np.ndarray:
    """Unicode scalar values of `s` as an int32 array."""
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32).astype(np.int32)


def sauvola(padded: np.ndarray, height: int, width: int, wy: int, wx: int,
            k: float) -> np.ndarray:
    padded = np.ascontiguousarray(padded, dtype=np.uint8)
    return _impl.sauvola(padded, height, width, wy, wx, float(k))


def levenshtein(a: np.ndarray, b: np.ndarray) -> int:
    a = np.ascontiguousarray(a, dtype=np.int32)
    b = np.ascontiguousarray(b, dtype=np.int32)
    return _impl.levenshtein(a, b)


def align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int32)
    b = np.ascontiguousarray(b, dtype=np.int32)
    return _impl.align(a, b)


def warp_bilinear_clamp(img: np.ndarray, ys: np.ndarray,
                        xs: np.ndarray) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    return _impl.warp_bilinear_clamp(img, ys, xs)


def warp_bilinear_fill(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                       fill: float) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    return _impl.warp_bilinear_fill(img, ys, xs, float(fill))
