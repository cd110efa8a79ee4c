"""Small input-validation helpers used across modules."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_shape(a: np.ndarray, shape: tuple[int, ...], name: str = "array") -> np.ndarray:
    if tuple(a.shape) != tuple(shape):
        raise ShapeError(f"{name}: expected shape {tuple(shape)}, got {tuple(a.shape)}")
    return a


def check_ndim(a: np.ndarray, ndim: int, name: str = "array") -> np.ndarray:
    if a.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim} dimensions, got {a.ndim}")
    return a


def as_f32(a, name: str = "array") -> np.ndarray:
    """Coerce to a C-contiguous float32 array without copying when possible."""
    out = np.ascontiguousarray(a, dtype=np.float32)
    if out.ndim == 0:
        raise ShapeError(f"{name}: scalar where an array was expected")
    return out


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"{name}: contains non-finite values")
    return a
