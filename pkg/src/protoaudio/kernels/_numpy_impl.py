"""Numpy fallback for the convolution/pooling kernels.

Convolution goes through im2col so the inner product runs inside BLAS.
Shapes follow the [batch, channel, height, width] layout used everywhere
else; all arrays are float64 and C-contiguous.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    """Gather sliding windows of a padded input into [B, Cin*kh*kw, out_h*out_w]."""
    b, cin = xp.shape[0], xp.shape[1]
    cols = np.empty((b, cin, kh, kw, out_h, out_w), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride]
    return cols.reshape(b, cin * kh * kw, out_h * out_w)


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    b, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, kh, kw, stride, out_h, out_w)
    w2 = w.reshape(cout, cin * kh * kw)
    out = np.matmul(w2[None, :, :], cols)
    return np.ascontiguousarray(out.reshape(b, cout, out_h, out_w))


def conv2d_backward(
    x: np.ndarray, w: np.ndarray, gout: np.ndarray, stride: int, pad: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. input and weight for conv2d_forward."""
    b, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    out_h, out_w = gout.shape[2], gout.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, kh, kw, stride, out_h, out_w)
    g2 = gout.reshape(b, cout, out_h * out_w)

    gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(cout, cin, kh, kw)

    w2 = w.reshape(cout, cin * kh * kw)
    gcols = np.matmul(w2.T[None, :, :], g2)
    gcols = gcols.reshape(b, cin, kh, kw, out_h, out_w)
    gxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += gcols[:, :, i, j]
    if pad:
        gxp = gxp[:, :, pad : pad + h, pad : pad + wd]
    return np.ascontiguousarray(gxp), np.ascontiguousarray(gw)


def maxpool2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2/stride-2 max pooling.

    Returns the pooled grid plus a uint8 code per output cell recording which
    window position won (row-major scan, first maximum wins on ties) so the
    backward pass routes the gradient to exactly one input cell.
    """
    b, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    windows = (
        x.reshape(b, c, oh, 2, ow, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, oh, ow, 4)
    )
    idx = windows.argmax(axis=-1).astype(np.uint8)
    out = np.take_along_axis(windows, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(gout: np.ndarray, idx: np.ndarray) -> np.ndarray:
    b, c, oh, ow = gout.shape
    gwin = np.zeros((b, c, oh, ow, 4), dtype=np.float64)
    np.put_along_axis(gwin, idx[..., None].astype(np.intp), gout[..., None], axis=-1)
    gx = (
        gwin.reshape(b, c, oh, ow, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, oh * 2, ow * 2)
    )
    return np.ascontiguousarray(gx)
