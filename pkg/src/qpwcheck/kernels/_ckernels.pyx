# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see _pykernels for semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, pow

cnp.import_array()


def symmetric_tensor_mix(phases, weights, int D):
    cdef const double[:, ::1] ph = np.ascontiguousarray(phases, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t K = ph.shape[0]
    cdef Py_ssize_t k = ph.shape[1]
    cdef Py_ssize_t width = 2 * D - 1
    cdef Py_ssize_t size = 1
    cdef Py_ssize_t f, t, a, b, cur, d
    for f in range(k):
        size *= width
    out_re_arr = np.zeros(size, dtype=np.float64)
    out_im_arr = np.zeros(size, dtype=np.float64)
    buf_re_arr = np.empty(size, dtype=np.float64)
    buf_im_arr = np.empty(size, dtype=np.float64)
    e_re_arr = np.empty(width, dtype=np.float64)
    e_im_arr = np.empty(width, dtype=np.float64)
    cdef double[::1] out_re = out_re_arr
    cdef double[::1] out_im = out_im_arr
    cdef double[::1] buf_re = buf_re_arr
    cdef double[::1] buf_im = buf_im_arr
    cdef double[::1] e_re = e_re_arr
    cdef double[::1] e_im = e_im_arr
    cdef double th, x, y, wt
    for t in range(K):
        wt = w[t]
        if wt == 0.0:
            continue
        # seed buffer with the first factor, scaled by the weight
        th = ph[t, 0]
        for d in range(width):
            buf_re[d] = wt * cos(th * (d - (D - 1)))
            buf_im[d] = wt * sin(th * (d - (D - 1)))
        cur = width
        for f in range(1, k):
            th = ph[t, f]
            for d in range(width):
                e_re[d] = cos(th * (d - (D - 1)))
                e_im[d] = sin(th * (d - (D - 1)))
            # expand in place from the back so sources are read before overwrite
            a = cur - 1
            while a >= 0:
                x = buf_re[a]
                y = buf_im[a]
                for b in range(width):
                    buf_re[a * width + b] = x * e_re[b] - y * e_im[b]
                    buf_im[a * width + b] = x * e_im[b] + y * e_re[b]
                a -= 1
            cur *= width
        for a in range(size):
            out_re[a] += buf_re[a]
            out_im[a] += buf_im[a]
    scale = pow(<double>D, <double>k)
    return (out_re_arr + 1j * out_im_arr) / scale


def symmetric_fidelities(diag_sums, phases):
    g = np.asarray(diag_sums, dtype=np.complex128)
    cdef const double[::1] g_re = np.ascontiguousarray(g.real)
    cdef const double[::1] g_im = np.ascontiguousarray(g.imag)
    cdef const double[::1] ph = np.ascontiguousarray(phases, dtype=np.float64)
    cdef Py_ssize_t width = g_re.shape[0]
    cdef int D = (width + 1) // 2
    cdef Py_ssize_t K = ph.shape[0]
    out_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t, d
    cdef double th, acc, ang
    for t in range(K):
        th = ph[t]
        acc = 0.0
        for d in range(width):
            ang = th * (d - (D - 1))
            # Re(g * exp(-i ang))
            acc += g_re[d] * cos(ang) + g_im[d] * sin(ang)
        out[t] = acc / D
    return out_arr


def first_failure(pass_prob, uniforms):
    cdef const double[:, ::1] p = np.ascontiguousarray(pass_prob, dtype=np.float64)
    cdef const double[:, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t T = p.shape[0]
    cdef Py_ssize_t s = p.shape[1]
    out_arr = np.full(T, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, r
    for i in range(T):
        for r in range(s):
            if u[i, r] >= p[i, r]:
                out[i] = r
                break
    return out_arr
