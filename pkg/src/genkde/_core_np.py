"""Pure-numpy implementation of the pairwise Gaussian-kernel reductions.

Mirrors the compiled module ``genkde._core``: every function computes, per
query point, a stable log-sum-exp over the kernel values centered at the
support points, plus optional softmax-weighted kernel moments. Query blocks
are sized to bound scratch memory; each query's reduction is independent, so
results do not depend on the blocking.
"""

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))

# ~32 MB of float64 scratch per (block × support) distance matrix
_BLOCK_ELEMS = 4_000_000


def _block_rows(m):
    return max(1, _BLOCK_ELEMS // max(m, 1))


def kde_panel(support, queries, h, want_sqdist=False, want_diff=False):
    """Per-query KDE statistics against a fixed support set.

    Returns ``(log_density, wmean_sqdist, wmean_diff)`` where, with kernel
    weights g_i = exp(-||q - z_i||^2 / 2h^2):

    - log_density[j] = log((1/m) * sum_i N(q_j - z_i; 0, h^2 I))
    - wmean_sqdist[j] = sum_i g_i ||q_j - z_i||^2 / sum_i g_i   (or None)
    - wmean_diff[j]  = sum_i g_i (q_j - z_i)      / sum_i g_i   (or None)

    The weighted moments are softmax averages, finite even when every kernel
    value underflows in the linear domain.
    """
    m, dim = support.shape
    n = queries.shape[0]
    inv_two_h2 = 1.0 / (2.0 * h * h)
    log_norm = -0.5 * dim * (_LOG_2PI + 2.0 * np.log(h)) - np.log(m)

    log_density = np.empty(n)
    wmean_sqdist = np.empty(n) if want_sqdist else None
    wmean_diff = np.empty((n, dim)) if want_diff else None

    sup_sq = np.einsum("ij,ij->i", support, support)
    step = _block_rows(m)
    for start in range(0, n, step):
        stop = min(start + step, n)
        q = queries[start:stop]
        q_sq = np.einsum("ij,ij->i", q, q)
        d2 = q_sq[:, None] + sup_sq[None, :] - 2.0 * (q @ support.T)
        np.maximum(d2, 0.0, out=d2)
        expo = d2 * (-inv_two_h2)
        peak = expo.max(axis=1)
        w = np.exp(expo - peak[:, None])
        w_sum = w.sum(axis=1)
        log_density[start:stop] = peak + np.log(w_sum) + log_norm
        if want_sqdist:
            wmean_sqdist[start:stop] = np.einsum("ij,ij->i", w, d2) / w_sum
        if want_diff:
            wmean_diff[start:stop] = q - (w @ support) / w_sum[:, None]
    return log_density, wmean_sqdist, wmean_diff


def loo_panel(points, h, want_sqdist=False):
    """Leave-one-out KDE statistics within a single sample set.

    For each point z_i the support is every other point, with the mean taken
    over m - 1 kernels:

    - log_density[i] = log((1/(m-1)) * sum_{j != i} N(z_i - z_j; 0, h^2 I))
    - wmean_sqdist[i] = softmax-weighted mean of ||z_i - z_j||^2 over j != i
    """
    m, dim = points.shape
    inv_two_h2 = 1.0 / (2.0 * h * h)
    log_norm = -0.5 * dim * (_LOG_2PI + 2.0 * np.log(h)) - np.log(m - 1)

    log_density = np.empty(m)
    wmean_sqdist = np.empty(m) if want_sqdist else None

    pts_sq = np.einsum("ij,ij->i", points, points)
    step = _block_rows(m)
    for start in range(0, m, step):
        stop = min(start + step, m)
        q = points[start:stop]
        d2 = pts_sq[start:stop, None] + pts_sq[None, :] - 2.0 * (q @ points.T)
        np.maximum(d2, 0.0, out=d2)
        expo = d2 * (-inv_two_h2)
        rows = np.arange(stop - start)
        expo[rows, start + rows] = -np.inf
        peak = expo.max(axis=1)
        w = np.exp(expo - peak[:, None])
        w_sum = w.sum(axis=1)
        log_density[start:stop] = peak + np.log(w_sum) + log_norm
        if want_sqdist:
            wmean_sqdist[start:stop] = np.einsum("ij,ij->i", w, d2) / w_sum
    return log_density, wmean_sqdist
