# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution/pooling kernels.

Direct (non-im2col) convolution with OpenMP across batch/output-channel
work items. Every output cell is written by exactly one thread and
reductions stay thread-local, so results are bit-identical for any thread
count.
"""
import numpy as np

cimport cython
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()

BACKEND_NAME = "cython"


cdef inline void _conv_one(const double[:, :, :, ::1] xp, const double[:, :, :, ::1] w,
                           double[:, :, :, ::1] out, Py_ssize_t b, Py_ssize_t co,
                           Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t cin = xp.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t ci, i, j, r, c
    cdef double wv
    for r in range(oh):
        for c in range(ow):
            out[b, co, r, c] = 0.0
    for ci in range(cin):
        for i in range(kh):
            for j in range(kw):
                wv = w[co, ci, i, j]
                if wv == 0.0:
                    continue
                for r in range(oh):
                    if stride == 1:
                        for c in range(ow):
                            out[b, co, r, c] += wv * xp[b, ci, r + i, c + j]
                    else:
                        for c in range(ow):
                            out[b, co, r, c] += wv * xp[b, ci, r * stride + i, c * stride + j]


cdef inline void _conv3x3_one(const double[:, :, :, ::1] xp, const double[:, :, :, ::1] w,
                              double[:, :, :, ::1] out, Py_ssize_t b, Py_ssize_t co) noexcept nogil:
    # Fused 3x3/stride-1 path: one pass over each output row with 9 FMAs per cell.
    cdef Py_ssize_t cin = xp.shape[1]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t ci, r, c
    cdef double w00, w01, w02, w10, w11, w12, w20, w21, w22
    cdef const double* r0
    cdef const double* r1
    cdef const double* r2
    cdef double* orow
    for r in range(oh):
        orow = &out[b, co, r, 0]
        for c in range(ow):
            orow[c] = 0.0
        for ci in range(cin):
            w00 = w[co, ci, 0, 0]; w01 = w[co, ci, 0, 1]; w02 = w[co, ci, 0, 2]
            w10 = w[co, ci, 1, 0]; w11 = w[co, ci, 1, 1]; w12 = w[co, ci, 1, 2]
            w20 = w[co, ci, 2, 0]; w21 = w[co, ci, 2, 1]; w22 = w[co, ci, 2, 2]
            r0 = &xp[b, ci, r, 0]
            r1 = &xp[b, ci, r + 1, 0]
            r2 = &xp[b, ci, r + 2, 0]
            for c in range(ow):
                orow[c] += (w00 * r0[c] + w01 * r0[c + 1] + w02 * r0[c + 2]
                            + w10 * r1[c] + w11 * r1[c + 1] + w12 * r1[c + 2]
                            + w20 * r2[c] + w21 * r2[c + 1] + w22 * r2[c + 2])


def conv2d_forward(cnp.ndarray x, cnp.ndarray w, int stride, int pad):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    xpad = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else np.ascontiguousarray(x)
    out_arr = np.empty((b, cout, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] xp = xpad
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t t, nwork = b * cout
    cdef Py_ssize_t sd = stride
    cdef bint fused = kh == 3 and kw == 3 and stride == 1
    for t in prange(nwork, nogil=True, schedule="static"):
        if fused:
            _conv3x3_one(xp, wv, out, t // cout, t % cout)
        else:
            _conv_one(xp, wv, out, t // cout, t % cout, sd)
    return out_arr


cdef inline void _grad_input_one(double[:, :, :, ::1] gxp, const double[:, :, :, ::1] w,
                                 const double[:, :, :, ::1] gout, Py_ssize_t b,
                                 Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t cout = w.shape[0], cin = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    cdef Py_ssize_t co, ci, i, j, r, c
    cdef double g
    for co in range(cout):
        for ci in range(cin):
            for i in range(kh):
                for j in range(kw):
                    g = w[co, ci, i, j]
                    if g == 0.0:
                        continue
                    for r in range(oh):
                        for c in range(ow):
                            gxp[b, ci, r * stride + i, c * stride + j] += g * gout[b, co, r, c]


cdef inline void _grad_weight_one(double[:, :, :, ::1] gw, const double[:, :, :, ::1] xp,
                                  const double[:, :, :, ::1] gout, Py_ssize_t co,
                                  Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t b = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t kh = gw.shape[2], kw = gw.shape[3]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    cdef Py_ssize_t bb, ci, i, j, r, c
    cdef double acc
    for ci in range(cin):
        for i in range(kh):
            for j in range(kw):
                gw[co, ci, i, j] = 0.0
    for bb in range(b):
        for ci in range(cin):
            for i in range(kh):
                for j in range(kw):
                    acc = 0.0
                    for r in range(oh):
                        for c in range(ow):
                            acc = acc + gout[bb, co, r, c] * xp[bb, ci, r * stride + i, c * stride + j]
                    gw[co, ci, i, j] += acc


cdef inline void _grad_weight3x3_one(double[:, :, :, ::1] gw, const double[:, :, :, ::1] xp,
                                     const double[:, :, :, ::1] gout, Py_ssize_t co) noexcept nogil:
    cdef Py_ssize_t b = xp.shape[0], cin = xp.shape[1]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    cdef Py_ssize_t bb, ci, r, c
    cdef double g
    cdef double a00, a01, a02, a10, a11, a12, a20, a21, a22
    cdef const double* r0
    cdef const double* r1
    cdef const double* r2
    cdef const double* grow
    for ci in range(cin):
        a00 = a01 = a02 = a10 = a11 = a12 = a20 = a21 = a22 = 0.0
        for bb in range(b):
            for r in range(oh):
                grow = &gout[bb, co, r, 0]
                r0 = &xp[bb, ci, r, 0]
                r1 = &xp[bb, ci, r + 1, 0]
                r2 = &xp[bb, ci, r + 2, 0]
                for c in range(ow):
                    g = grow[c]
                    a00 = a00 + g * r0[c]; a01 = a01 + g * r0[c + 1]; a02 = a02 + g * r0[c + 2]
                    a10 = a10 + g * r1[c]; a11 = a11 + g * r1[c + 1]; a12 = a12 + g * r1[c + 2]
                    a20 = a20 + g * r2[c]; a21 = a21 + g * r2[c + 1]; a22 = a22 + g * r2[c + 2]
        gw[co, ci, 0, 0] = a00; gw[co, ci, 0, 1] = a01; gw[co, ci, 0, 2] = a02
        gw[co, ci, 1, 0] = a10; gw[co, ci, 1, 1] = a11; gw[co, ci, 1, 2] = a12
        gw[co, ci, 2, 0] = a20; gw[co, ci, 2, 1] = a21; gw[co, ci, 2, 2] = a22


def conv2d_backward(cnp.ndarray x, cnp.ndarray w, cnp.ndarray gout, int stride, int pad):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    xpad = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else np.ascontiguousarray(x)
    gw_arr = np.empty_like(w, dtype=np.float64)
    cdef double[:, :, :, ::1] xp = xpad
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(gout)
    cdef double[:, :, :, ::1] gxp
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[:, :, :, ::1] gfull
    cdef double[:, :, :, ::1] wv2
    cdef Py_ssize_t t
    cdef Py_ssize_t sd = stride
    cdef bint fused

    if stride == 1:
        # The input gradient of a stride-1 correlation is itself a correlation
        # of the padded output gradient with the flipped, channel-swapped kernel,
        # so it can reuse the vectorized forward loop.
        gpad = np.pad(gout, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        wflip = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        gxp_arr = np.empty_like(xpad)
        gfull = np.ascontiguousarray(gpad)
        gxp = gxp_arr
        wv2 = wflip
        fused = kh == 3 and kw == 3
        for t in prange(b * cin, nogil=True, schedule="static"):
            if fused:
                _conv3x3_one(gfull, wv2, gxp, t // cin, t % cin)
            else:
                _conv_one(gfull, wv2, gxp, t // cin, t % cin, 1)
    else:
        gxp_arr = np.zeros_like(xpad)
        gxp = gxp_arr
        for t in prange(b, nogil=True, schedule="static"):
            _grad_input_one(gxp, wv, gv, t, sd)
    fused = kh == 3 and kw == 3 and stride == 1
    for t in prange(cout, nogil=True, schedule="static"):
        if fused:
            _grad_weight3x3_one(gw, xp, gv, t)
        else:
            _grad_weight_one(gw, xp, gv, t, sd)
    gx_arr = gxp_arr[:, :, pad : pad + h, pad : pad + wd] if pad else gxp_arr
    return np.ascontiguousarray(gx_arr), gw_arr


def maxpool2_forward(cnp.ndarray x):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    out_arr = np.empty((b, c, oh, ow), dtype=np.float64)
    idx_arr = np.empty((b, c, oh, ow), dtype=np.uint8)
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x)
    cdef double[:, :, :, ::1] out = out_arr
    cdef unsigned char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t t, bb, cc, r, cl, i, j, k
    cdef double best, v
    cdef unsigned char bi
    for t in prange(b * c, nogil=True, schedule="static"):
        bb = t // c
        cc = t % c
        for r in range(oh):
            for cl in range(ow):
                best = xv[bb, cc, 2 * r, 2 * cl]
                bi = 0
                k = 0
                for i in range(2):
                    for j in range(2):
                        v = xv[bb, cc, 2 * r + i, 2 * cl + j]
                        if v > best:
                            best = v
                            bi = <unsigned char> k
                        k = k + 1
                out[bb, cc, r, cl] = best
                idx[bb, cc, r, cl] = bi
    return out_arr, idx_arr


def maxpool2_backward(cnp.ndarray gout, cnp.ndarray idx):
    cdef Py_ssize_t b = gout.shape[0], c = gout.shape[1]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    gx_arr = np.zeros((b, c, oh * 2, ow * 2), dtype=np.float64)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(gout)
    cdef unsigned char[:, :, :, ::1] iv = np.ascontiguousarray(idx)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t t, bb, cc, r, cl
    cdef unsigned char k
    for t in prange(b * c, nogil=True, schedule="static"):
        bb = t // c
        cc = t % c
        for r in range(oh):
            for cl in range(ow):
                k = iv[bb, cc, r, cl]
                gx[bb, cc, 2 * r + (k >> 1), 2 * cl + (k & 1)] = gv[bb, cc, r, cl]
    return gx_arr
