# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels: fused passes over measurement-sized rasters.

Semantics are defined by rotoptych._kernels_np; keep the two in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def amplitude_constraint(cnp.complex128_t[:, ::1] psi, double[:, ::1] sqrt_i, double epsilon):
    cdef Py_ssize_t h = psi.shape[0], w = psi.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out_arr = np.empty((h, w), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef double re, im, power, inv
    for y in range(h):
        for x in range(w):
            re = psi[y, x].real
            im = psi[y, x].imag
            power = re * re + im * im
            if power <= epsilon:
                out[y, x].real = sqrt_i[y, x]
                out[y, x].imag = 0.0
            else:
                inv = sqrt_i[y, x] / sqrt(power)
                out[y, x].real = re * inv
                out[y, x].imag = im * inv
    return out_arr


def intensity_sse(cnp.complex128_t[:, ::1] psi, double[:, ::1] intensity):
    cdef Py_ssize_t h = psi.shape[0], w = psi.shape[1]
    cdef Py_ssize_t y, x
    cdef double re, im, d, acc = 0.0
    for y in range(h):
        for x in range(w):
            re = psi[y, x].real
            im = psi[y, x].imag
            d = re * re + im * im - intensity[y, x]
            acc += d * d
    return acc


def sse_diff_stack(cnp.complex128_t[:, :, ::1] stack, cnp.complex128_t[:, ::1] target):
    cdef Py_ssize_t c = stack.shape[0], h = stack.shape[1], w = stack.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(c, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, y, x
    cdef double re, im, acc
    for i in range(c):
        acc = 0.0
        for y in range(h):
            for x in range(w):
                re = stack[i, y, x].real - target[y, x].real
                im = stack[i, y, x].imag - target[y, x].imag
                acc += re * re + im * im
        out[i] = acc
    return out_arr
