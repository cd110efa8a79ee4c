"""Dense layer kernels: valid convolution, ReLU and fully-connected maps.

All kernels are dtype-preserving (float32 in, float32 out) but accumulate
reductions in double precision so results are reproducible across BLAS
builds at 1e-6 tolerances. Batched variants carry a leading N axis and are
what the rest of the toolkit calls in hot loops; the single-sample wrappers
match the shapes used throughout the docs.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .validation import check_ndim


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    if size < kernel:
        raise ShapeError(f"input extent {size} smaller than kernel {kernel}")
    return (size - kernel) // stride + 1


def _im2col(x: np.ndarray, kernel: int, stride: int):
    """(N,C,H,W) -> (N, Ho*Wo, C*K*K) patch matrix (a strided view, then copy)."""
    n, c, h, w = x.shape
    ho = conv_output_size(h, kernel, stride)
    wo = conv_output_size(w, kernel, stride)
    sn, sc, sh, sw = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, ho, wo, kernel, kernel),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )
    cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho * wo, c * kernel * kernel)
    return cols, ho, wo


def _col2im(dcols: np.ndarray, x_shape, kernel: int, stride: int) -> np.ndarray:
    """Scatter-add patch gradients back onto the input grid."""
    n, c, h, w = x_shape
    ho = conv_output_size(h, kernel, stride)
    wo = conv_output_size(w, kernel, stride)
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    d6 = dcols.reshape(n, ho, wo, c, kernel, kernel).transpose(0, 3, 1, 2, 4, 5)
    for i in range(kernel):
        for j in range(kernel):
            dx[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += d6[
                :, :, :, :, i, j
            ]
    return dx


def _acc_dot(a: np.ndarray, b: np.ndarray, out_dtype) -> np.ndarray:
    # Double-precision accumulation regardless of storage dtype.
    return (a.astype(np.float64, copy=False) @ b.astype(np.float64, copy=False)).astype(
        out_dtype, copy=False
    )


def conv2d_forward_batch(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int):
    """x:(N,C,H,W), w:(O,C,K,K), b:(O,) -> y:(N,O,Ho,Wo) plus backward cache."""
    check_ndim(x, 4, "conv input")
    check_ndim(w, 4, "conv weights")
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    n, c, h, wd = x.shape
    o, cw, k, k2 = w.shape
    if k != k2:
        raise ShapeError(f"conv kernel must be square, got {k}x{k2}")
    if c != cw:
        raise ShapeError(f"conv input has {c} channels but weights expect {cw}")
    if b.shape != (o,):
        raise ShapeError(f"conv bias: expected shape ({o},), got {tuple(b.shape)}")
    cols, ho, wo = _im2col(x, k, stride)
    wmat = w.reshape(o, c * k * k)
    y = _acc_dot(cols.reshape(n * ho * wo, -1), wmat.T, x.dtype)
    y = y.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    y = y + b.reshape(1, o, 1, 1).astype(y.dtype, copy=False)
    cache = (x.shape, cols, w, stride)
    return np.ascontiguousarray(y), cache


def conv2d_backward_batch(dy: np.ndarray, cache):
    """dy:(N,O,Ho,Wo) -> (dx, dw, db) for the cached forward call."""
    x_shape, cols, w, stride = cache
    n, o, ho, wo = dy.shape
    k = w.shape[2]
    dyf = dy.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
    colsf = cols.reshape(n * ho * wo, -1)
    dw = _acc_dot(dyf.T, colsf, w.dtype).reshape(w.shape)
    db = dy.astype(np.float64).sum(axis=(0, 2, 3)).astype(w.dtype)
    dcols = _acc_dot(dyf, w.reshape(o, -1), dy.dtype).reshape(n, ho * wo, -1)
    dx = _col2im(dcols, x_shape, k, stride)
    return dx, dw, db


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    """Valid (unpadded) 2-D convolution of a single C×H×W input."""
    check_ndim(x, 3, "conv input")
    y, _ = conv2d_forward_batch(x[None], w, b, stride)
    return y[0]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return dy * (pre > 0)


def fc_forward_batch(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x:(N,D), w:(M,D), b:(M,) -> y:(N,M) plus backward cache."""
    check_ndim(x, 2, "fc input")
    m, d = w.shape
    if x.shape[1] != d:
        raise ShapeError(f"fc input has {x.shape[1]} features but weights expect {d}")
    if b.shape != (m,):
        raise ShapeError(f"fc bias: expected shape ({m},), got {tuple(b.shape)}")
    y = _acc_dot(x, w.T, x.dtype) + b.astype(x.dtype, copy=False)
    return y, (x, w)


def fc_backward_batch(dy: np.ndarray, cache):
    x, w = cache
    dw = _acc_dot(dy.T, x, w.dtype)
    db = dy.astype(np.float64).sum(axis=0).astype(w.dtype)
    dx = _acc_dot(dy, w, dy.dtype)
    return dx, dw, db


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = W x + b for a single feature vector."""
    check_ndim(x, 1, "fc input")
    y, _ = fc_forward_batch(x[None], w, b)
    return y[0]


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z64 = z.astype(np.float64, copy=False)
    z64 = z64 - z64.max(axis=axis, keepdims=True)
    e = np.exp(z64)
    return (e / e.sum(axis=axis, keepdims=True)).astype(z.dtype, copy=False)
