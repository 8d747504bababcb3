# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops over the 2**n computational basis.

Bit convention: atom ``a`` occupies bit ``n - 1 - a`` of the basis index.
Every routine here has a numpy twin in ``_fallback`` with the same signature.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def interaction_diagonal(const double[:, ::1] U):
    """sum_{j<k} U[j, k] n_j n_k for every basis state."""
    cdef Py_ssize_t n = U.shape[0]
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(dim, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] rowsum = np.zeros(dim, dtype=np.float64)
    cdef Py_ssize_t pos, s, half, a, b, other
    # states whose highest set bit is `pos` extend the states below it by one atom
    with nogil:
        for pos in range(n):
            a = n - 1 - pos
            half = (<Py_ssize_t>1) << pos
            # rowsum[s] = sum of U[a, atoms set in s] for s < half
            rowsum[0] = 0.0
            for s in range(1, half):
                # peel lowest set bit
                b = 0
                while not (s >> b) & 1:
                    b += 1
                other = n - 1 - b
                rowsum[s] = rowsum[s & (s - 1)] + U[a, other]
            for s in range(half):
                out[half + s] = out[s] + rowsum[s]
    return out_arr


def up_counts(int n):
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_arr = np.zeros(dim, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t s
    with nogil:
        for s in range(1, dim):
            out[s] = out[s >> 1] + (s & 1)
    return out_arr


def matvec(const double complex[::1] psi, const double[::1] diag, double half_omega,
           int n, double complex[::1] out):
    """out = diag * psi + half_omega * sum_a X_a psi."""
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t s, b
    cdef double complex acc
    with nogil:
        for s in range(dim):
            acc = 0
            for b in range(n):
                acc = acc + psi[s ^ ((<Py_ssize_t>1) << b)]
            out[s] = diag[s] * psi[s] + half_omega * acc


def cheb_step_batch(phi_c, prev_c, out_c, acc_c, const double[::1] diag,
                    double half_omega, int n, double inv_scale, double shift,
                    double complex coef, double factor):
    """out = factor * inv_scale * (H - shift) phi - prev;  acc += coef * out.

    Arrays are complex (dim, batch) blocks.  H is real, so the work runs on
    float64 views with real and imaginary parts interleaved.
    """
    cdef double[:, ::1] phi = phi_c.view(np.float64)
    cdef double[:, ::1] prev = prev_c.view(np.float64)
    cdef double[:, ::1] out = out_c.view(np.float64)
    cdef double[:, ::1] acc = acc_c.view(np.float64)
    cdef Py_ssize_t dim = phi.shape[0]
    cdef Py_ssize_t width = phi.shape[1]
    cdef Py_ssize_t s, b, i, t
    cdef double dsh, hs, re, im
    cdef double fs = factor * inv_scale
    cdef double cr = coef.real
    cdef double ci = coef.imag
    hs = half_omega * fs
    with nogil:
        for s in range(dim):
            dsh = (diag[s] - shift) * fs
            for i in range(width):
                out[s, i] = dsh * phi[s, i] - prev[s, i]
            for b in range(n):
                t = s ^ ((<Py_ssize_t>1) << b)
                for i in range(width):
                    out[s, i] += hs * phi[t, i]
            for i in range(0, width, 2):
                re = out[s, i]
                im = out[s, i + 1]
                acc[s, i] += cr * re - ci * im
                acc[s, i + 1] += cr * im + ci * re


def cheb_step(phi_c, prev_c, out_c, acc_c, const double[::1] diag,
              double half_omega, int n, double inv_scale, double shift,
              double complex coef, double factor):
    """Single-state form of ``cheb_step_batch``."""
    cdef double[::1] phi = phi_c.view(np.float64)
    cdef double[::1] prev = prev_c.view(np.float64)
    cdef double[::1] out = out_c.view(np.float64)
    cdef double[::1] acc = acc_c.view(np.float64)
    cdef Py_ssize_t dim = diag.shape[0]
    cdef Py_ssize_t s, b, t
    cdef double fs = factor * inv_scale
    cdef double hs = half_omega * fs
    cdef double cr = coef.real
    cdef double ci = coef.imag
    cdef double dsh, fr, fi, re, im
    with nogil:
        for s in range(dim):
            fr = 0.0
            fi = 0.0
            for b in range(n):
                t = 2 * (s ^ ((<Py_ssize_t>1) << b))
                fr = fr + phi[t]
                fi = fi + phi[t + 1]
            dsh = (diag[s] - shift) * fs
            re = dsh * phi[2 * s] + hs * fr - prev[2 * s]
            im = dsh * phi[2 * s + 1] + hs * fi - prev[2 * s + 1]
            out[2 * s] = re
            out[2 * s + 1] = im
            acc[2 * s] += cr * re - ci * im
            acc[2 * s + 1] += cr * im + ci * re
