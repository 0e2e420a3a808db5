# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the exponential-family integrals.

Both functions evaluate integrals of ``exp(-<lam, h(x)>)`` against the
quadrature weights with the largest exponent shifted out. They mirror
``maxentsd._kernels_py`` exactly; keep the two in sync.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isfinite

cnp.import_array()

# Below this size a scalar libm loop beats the call overhead of numpy's
# vectorized exp; above it the SIMD ufunc wins.
DEF VECTOR_EXP_MIN = 256


cdef void _shifted_exp(double[::1] v, double s):
    """In place ``v <- exp(v - s)``."""
    cdef Py_ssize_t i, n = v.shape[0]
    if n < VECTOR_EXP_MIN:
        for i in range(n):
            v[i] = exp(v[i] - s)
        return
    arr = np.asarray(v)
    np.subtract(arr, s, out=arr)
    np.exp(arr, out=arr)


def log_partition(const double[:, ::1] H, const double[::1] w, const double[::1] lam):
    """Return ``log sum_i w_i exp(-H[i] @ lam)``."""
    cdef Py_ssize_t n = H.shape[0], M = H.shape[1], i, k
    cdef double e, s = -INFINITY, z = 0.0
    cdef double[::1] expo = np.empty(n)
    for i in range(n):
        e = 0.0
        for k in range(M):
            e -= H[i, k] * lam[k]
        expo[i] = e
        if e > s:
            s = e
    if not isfinite(s):
        return float("nan")
    _shifted_exp(expo, s)
    for i in range(n):
        z += w[i] * expo[i]
    if not (z > 0.0):
        return float("nan")
    return s + log(z)


def tilted_moments(const double[:, ::1] H, const double[::1] w, const double[::1] lam):
    """Return ``(log Z, mean, covariance)`` of ``h`` under the tilted measure."""
    cdef Py_ssize_t n = H.shape[0], M = H.shape[1], i, k, l
    cdef double e, s = -INFINITY, z = 0.0, pi
    cdef double[::1] p = np.empty(n)
    mu_arr = np.zeros(M)
    cov_arr = np.zeros((M, M))
    cdef double[::1] mu = mu_arr
    cdef double[:, ::1] cov = cov_arr
    cdef double[::1] c = np.empty(M)

    for i in range(n):
        e = 0.0
        for k in range(M):
            e -= H[i, k] * lam[k]
        p[i] = e
        if e > s:
            s = e
    if not isfinite(s):
        return float("nan"), mu_arr * float("nan"), cov_arr * float("nan")
    _shifted_exp(p, s)
    for i in range(n):
        pi = w[i] * p[i]
        p[i] = pi
        z += pi
        for k in range(M):
            mu[k] += pi * H[i, k]
    if not (z > 0.0):
        return float("nan"), mu_arr * float("nan"), cov_arr * float("nan")
    for k in range(M):
        mu[k] /= z
    for i in range(n):
        pi = p[i] / z
        for k in range(M):
            c[k] = H[i, k] - mu[k]
        for k in range(M):
            for l in range(k + 1):
                cov[k, l] += pi * c[k] * c[l]
    for k in range(M):
        for l in range(k):
            cov[l, k] = cov[k, l]
    return s + log(z), mu_arr, cov_arr
