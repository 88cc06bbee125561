# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled statevector kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef extern from *:
    int __builtin_popcountll(unsigned long long) noexcept nogil


cdef inline double complex _ipow(long n_y) noexcept nogil:
    cdef long r = n_y % 4
    if r < 0:
        r += 4
    if r == 0:
        return 1.0
    elif r == 1:
        return 1.0j
    elif r == 2:
        return -1.0
    return -1.0j


cdef inline double _zsign(unsigned long long b, unsigned long long z) noexcept nogil:
    return -1.0 if (__builtin_popcountll(b & z) & 1) else 1.0


def pauli_rotation(double complex[:, ::1] psi, unsigned long long x_mask,
                   unsigned long long z_mask, long n_y, angles):
    cdef const double[::1] ang = np.ascontiguousarray(
        np.broadcast_to(np.asarray(angles, dtype=np.float64).ravel(), (psi.shape[0],)))
    cdef Py_ssize_t batch = psi.shape[0]
    cdef unsigned long long dim = psi.shape[1]
    cdef Py_ssize_t row
    cdef unsigned long long c, s
    cdef double complex ph = _ipow(n_y), a, b, mis
    cdef double cs
    with nogil:
        for row in range(batch):
            cs = cos(ang[row])
            mis = -1.0j * sin(ang[row]) * ph
            if x_mask == 0:
                for c in range(dim):
                    psi[row, c] = (cs + mis * _zsign(c, z_mask)) * psi[row, c]
                continue
            for c in range(dim):
                s = c ^ x_mask
                if s < c:
                    continue
                a = psi[row, c]
                b = psi[row, s]
                # (P psi)[c] = ph * sign(s) * psi[s]
                psi[row, c] = cs * a + mis * _zsign(s, z_mask) * b
                psi[row, s] = cs * b + mis * _zsign(c, z_mask) * a


def apply_pauli(double complex[:, ::1] psi, x_masks, z_masks, n_ys):
    cdef const unsigned long long[::1] xs = np.ascontiguousarray(x_masks, dtype=np.uint64)
    cdef const unsigned long long[::1] zs = np.ascontiguousarray(z_masks, dtype=np.uint64)
    cdef const long[::1] ys = np.ascontiguousarray(n_ys, dtype=np.int_)
    cdef Py_ssize_t batch = psi.shape[0]
    cdef unsigned long long dim = psi.shape[1]
    cdef Py_ssize_t row
    cdef unsigned long long c, s, x, z
    cdef double complex ph, a, b
    with nogil:
        for row in range(batch):
            x = xs[row]
            z = zs[row]
            if x == 0 and z == 0:
                continue
            ph = _ipow(ys[row])
            if x == 0:
                for c in range(dim):
                    psi[row, c] = ph * _zsign(c, z) * psi[row, c]
                continue
            for c in range(dim):
                s = c ^ x
                if s < c:
                    continue
                a = psi[row, c]
                b = psi[row, s]
                psi[row, c] = ph * _zsign(s, z) * b
                psi[row, s] = ph * _zsign(c, z) * a


def pauli_expectation(double complex[:, ::1] psi, unsigned long long x_mask,
                      unsigned long long z_mask, long n_y):
    cdef Py_ssize_t batch = psi.shape[0]
    cdef unsigned long long dim = psi.shape[1]
    out = np.empty(batch, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t row
    cdef unsigned long long c, s
    cdef double complex ph = _ipow(n_y), acc, v
    with nogil:
        for row in range(batch):
            acc = 0.0
            for c in range(dim):
                s = c ^ x_mask
                v = psi[row, c]
                acc = acc + (v.real - 1.0j * v.imag) * _zsign(s, z_mask) * psi[row, s]
            res[row] = (ph * acc).real
    return out


def two_qubit_gate(double complex[:, ::1] psi, int qubit, gates):
    g_arr = np.asarray(gates, dtype=np.complex128)
    if g_arr.ndim == 2:
        g_arr = np.broadcast_to(g_arr, (psi.shape[0], 4, 4))
    cdef const double complex[:, :, ::1] g = np.ascontiguousarray(g_arr)
    cdef Py_ssize_t batch = psi.shape[0]
    cdef unsigned long long dim = psi.shape[1]
    cdef unsigned long long lo = 1ULL << qubit
    cdef unsigned long long hi = lo << 1
    cdef unsigned long long base, i0, i1, i2, i3
    cdef Py_ssize_t row
    cdef double complex a0, a1, a2, a3
    with nogil:
        for row in range(batch):
            for base in range(dim):
                if base & (lo | hi):
                    continue
                i0 = base
                i1 = base | lo
                i2 = base | hi
                i3 = base | lo | hi
                a0 = psi[row, i0]
                a1 = psi[row, i1]
                a2 = psi[row, i2]
                a3 = psi[row, i3]
                psi[row, i0] = g[row, 0, 0] * a0 + g[row, 0, 1] * a1 + g[row, 0, 2] * a2 + g[row, 0, 3] * a3
                psi[row, i1] = g[row, 1, 0] * a0 + g[row, 1, 1] * a1 + g[row, 1, 2] * a2 + g[row, 1, 3] * a3
                psi[row, i2] = g[row, 2, 0] * a0 + g[row, 2, 1] * a1 + g[row, 2, 2] * a2 + g[row, 2, 3] * a3
                psi[row, i3] = g[row, 3, 0] * a0 + g[row, 3, 1] * a1 + g[row, 3, 2] * a2 + g[row, 3, 3] * a3


def single_qubit_gate(double complex[:, ::1] psi, int qubit, gates):
    g_arr = np.asarray(gates, dtype=np.complex128)
    if g_arr.ndim == 2:
        g_arr = np.broadcast_to(g_arr, (psi.shape[0], 2, 2))
    cdef const double complex[:, :, ::1] g = np.ascontiguousarray(g_arr)
    cdef Py_ssize_t batch = psi.shape[0]
    cdef unsigned long long dim = psi.shape[1]
    cdef unsigned long long lo = 1ULL << qubit
    cdef unsigned long long base
    cdef Py_ssize_t row
    cdef double complex a0, a1
    with nogil:
        for row in range(batch):
            for base in range(dim):
                if base & lo:
                    continue
                a0 = psi[row, base]
                a1 = psi[row, base | lo]
                psi[row, base] = g[row, 0, 0] * a0 + g[row, 0, 1] * a1
                psi[row, base | lo] = g[row, 1, 0] * a0 + g[row, 1, 1] * a1
