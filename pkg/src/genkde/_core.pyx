# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pairwise Gaussian-kernel reductions.

Same contract as genkde._core_np. Each query runs a single-pass online
log-sum-exp over the support set, so per-query results are exact up to one
rounding per term and independent of the thread count (parallelism is across
queries only; no cross-query reductions).
"""

from cython.parallel cimport prange
cimport openmp
from libc.math cimport exp, log, INFINITY

import numpy as np

cdef double LOG_2PI = 1.8378770664093453


cdef inline int _threads(int requested) noexcept nogil:
    if requested > 0:
        return requested
    return openmp.omp_get_max_threads()


def kde_panel(const double[:, ::1] support, const double[:, ::1] queries, double h,
              bint want_sqdist=False, bint want_diff=False, int num_threads=0):
    """Per-query log KDE density plus optional softmax-weighted kernel moments."""
    cdef Py_ssize_t m = support.shape[0]
    cdef Py_ssize_t dim = support.shape[1]
    cdef Py_ssize_t n = queries.shape[0]
    cdef double inv_two_h2 = 1.0 / (2.0 * h * h)
    cdef double log_norm = -0.5 * dim * (LOG_2PI + 2.0 * log(h)) - log(<double> m)

    log_density_arr = np.empty(n)
    sqdist_arr = np.empty(n) if want_sqdist else np.empty(0)
    diff_arr = np.empty((n, dim)) if want_diff else np.empty((0, dim))

    cdef double[::1] out_log = log_density_arr
    cdef double[::1] out_sq = sqdist_arr
    cdef double[:, ::1] out_diff = diff_arr

    cdef Py_ssize_t i, j, k
    cdef double d2, t, e, r, peak, w_sum, acc_sq
    cdef int nt = _threads(num_threads)

    with nogil:
        for j in prange(n, schedule='static', num_threads=nt):
            peak = -INFINITY
            w_sum = 0.0
            acc_sq = 0.0
            if want_diff:
                for k in range(dim):
                    out_diff[j, k] = 0.0
            for i in range(m):
                d2 = 0.0
                for k in range(dim):
                    t = queries[j, k] - support[i, k]
                    d2 = d2 + t * t
                e = -d2 * inv_two_h2
                if e <= peak:
                    r = exp(e - peak)
                    w_sum = w_sum + r
                    if want_sqdist:
                        acc_sq = acc_sq + r * d2
                    if want_diff:
                        for k in range(dim):
                            out_diff[j, k] += r * (queries[j, k] - support[i, k])
                else:
                    # new running maximum: rescale the accumulators
                    r = exp(peak - e)
                    w_sum = w_sum * r + 1.0
                    if want_sqdist:
                        acc_sq = acc_sq * r + d2
                    if want_diff:
                        for k in range(dim):
                            out_diff[j, k] = out_diff[j, k] * r + (queries[j, k] - support[i, k])
                    peak = e
            out_log[j] = peak + log(w_sum) + log_norm
            if want_sqdist:
                out_sq[j] = acc_sq / w_sum
            if want_diff:
                for k in range(dim):
                    out_diff[j, k] /= w_sum

    return (log_density_arr,
            sqdist_arr if want_sqdist else None,
            diff_arr if want_diff else None)


def loo_panel(const double[:, ::1] points, double h, bint want_sqdist=False,
              int num_threads=0):
    """Leave-one-out log KDE density (mean over m-1 kernels) per point."""
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    cdef double inv_two_h2 = 1.0 / (2.0 * h * h)
    cdef double log_norm = -0.5 * dim * (LOG_2PI + 2.0 * log(h)) - log(<double> (m - 1))

    log_density_arr = np.empty(m)
    sqdist_arr = np.empty(m) if want_sqdist else np.empty(0)

    cdef double[::1] out_log = log_density_arr
    cdef double[::1] out_sq = sqdist_arr

    cdef Py_ssize_t i, j, k
    cdef double d2, t, e, r, peak, w_sum, acc_sq
    cdef int nt = _threads(num_threads)

    with nogil:
        for j in prange(m, schedule='static', num_threads=nt):
            peak = -INFINITY
            w_sum = 0.0
            acc_sq = 0.0
            for i in range(m):
                if i == j:
                    continue
                d2 = 0.0
                for k in range(dim):
                    t = points[j, k] - points[i, k]
                    d2 = d2 + t * t
                e = -d2 * inv_two_h2
                if e <= peak:
                    r = exp(e - peak)
                    w_sum = w_sum + r
                    if want_sqdist:
                        acc_sq = acc_sq + r * d2
                else:
                    r = exp(peak - e)
                    w_sum = w_sum * r + 1.0
                    if want_sqdist:
                        acc_sq = acc_sq * r + d2
                    peak = e
            out_log[j] = peak + log(w_sum) + log_norm
            if want_sqdist:
                out_sq[j] = acc_sq / w_sum

    return log_density_arr, sqdist_arr if want_sqdist else None
