# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay numerically interchangeable with _fallback."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _affine(const double[:, ::1] M, const double[::1] z,
                         const double[::1] g, double[::1] out) noexcept nogil:
    cdef Py_ssize_t d = M.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += M[i, j] * z[j]
        out[i] = acc + g[i]


def rk4_affine(M, forcing, z0, double h, Py_ssize_t nsteps):
    """Classical RK4 for z' = M z + g(t) with g tabulated on the half-step grid.

    ``forcing`` has shape (2*nsteps + 1, d); row 2k is g(t_k), row 2k+1 is
    g(t_k + h/2). Returns the (nsteps + 1, d) array of states.
    """
    cdef const double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef const double[:, ::1] G = np.ascontiguousarray(forcing, dtype=np.float64)
    cdef Py_ssize_t d = Mv.shape[0]
    if Mv.shape[1] != d or G.shape[1] != d or G.shape[0] != 2 * nsteps + 1:
        raise ValueError("shape mismatch between M, forcing and nsteps")
    out_arr = np.empty((nsteps + 1, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] z = np.array(z0, dtype=np.float64, copy=True)
    if z.shape[0] != d:
        raise ValueError("initial state has wrong length")
    cdef double[::1] k1 = np.empty(d)
    cdef double[::1] k2 = np.empty(d)
    cdef double[::1] k3 = np.empty(d)
    cdef double[::1] k4 = np.empty(d)
    cdef double[::1] tmp = np.empty(d)
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef Py_ssize_t n, i
    with nogil:
        for i in range(d):
            out[0, i] = z[i]
        for n in range(nsteps):
            _affine(Mv, z, G[2 * n], k1)
            for i in range(d):
                tmp[i] = z[i] + half * k1[i]
            _affine(Mv, tmp, G[2 * n + 1], k2)
            for i in range(d):
                tmp[i] = z[i] + half * k2[i]
            _affine(Mv, tmp, G[2 * n + 1], k3)
            for i in range(d):
                tmp[i] = z[i] + h * k3[i]
            _affine(Mv, tmp, G[2 * n + 2], k4)
            for i in range(d):
                z[i] = z[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                out[n + 1, i] = z[i]
    return out_arr


def iterate_linear(W, x0, Py_ssize_t nsteps):
    """States x_0..x_nsteps of x_{k+1} = W x_k, shape (nsteps + 1, n)."""
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n = Wv.shape[0]
    if Wv.shape[1] != n:
        raise ValueError("W must be square")
    out_arr = np.empty((nsteps + 1, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef const double[::1] x = np.ascontiguousarray(x0, dtype=np.float64)
    if x.shape[0] != n:
        raise ValueError("initial state has wrong length")
    cdef Py_ssize_t k, i, j
    cdef double acc
    with nogil:
        for i in range(n):
            out[0, i] = x[i]
        for k in range(nsteps):
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Wv[i, j] * out[k, j]
                out[k + 1, i] = acc
    return out_arr
