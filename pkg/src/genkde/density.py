"""Gaussian kernels, KDE, target distributions, sampling, and whitening."""

import struct

import numpy as np
from scipy.special import logsumexp

from . import backend
from .exceptions import NumericsError

_LOG_2PI = float(np.log(2.0 * np.pi))
_MAGIC = b"GKDE"
_VERSION = 1
_EIG_FLOOR = 1e-8
_WEIGHT_TOL = 1e-12


class SampleSet:
    """Immutable set of points in R^l, one row per sample.

    The universal currency between modules: KDE supports, evaluation batches,
    training data, and latent codes are all SampleSets.
    """

    __slots__ = ("_points",)

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64, order="C")
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty 2-D array (samples x dim)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all sample entries must be finite")
        pts.setflags(write=False)
        self._points = pts

    @property
    def points(self):
        """Read-only (n, dim) float64 array."""
        return self._points

    @property
    def dim(self):
        return self._points.shape[1]

    def __len__(self):
        return self._points.shape[0]

    def __repr__(self):
        return f"SampleSet(n={len(self)}, dim={self.dim})"

    def to_csv(self, path):
        """Write one sample per line, comma-separated, no header."""
        np.savetxt(path, self._points, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        pts = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        return cls(pts)

    def to_binary(self, path):
        """Write the binary tensor container (magic GKDE, v1, little-endian f64)."""
        with open(path, "wb") as fh:
            write_tensor(fh, self._points)

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            pts = read_tensor(fh)
        return cls(pts)


def write_tensor(fh, array):
    """Append one tensor block: magic, u32 version, u32 rows, u32 cols, f64 data."""
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError("tensor blocks hold 2-D arrays")
    rows, cols = arr.shape
    fh.write(struct.pack("<4sIII", _MAGIC, _VERSION, rows, cols))
    fh.write(arr.tobytes())


def read_tensor(fh):
    """Read one tensor block written by write_tensor, validating finiteness."""
    header = fh.read(16)
    if len(header) != 16:
        raise ValueError("truncated tensor header")
    magic, version, rows, cols = struct.unpack("<4sIII", header)
    if magic != _MAGIC:
        raise ValueError(f"bad magic bytes {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    payload = fh.read(8 * rows * cols)
    if len(payload) != 8 * rows * cols:
        raise ValueError("truncated tensor payload")
    arr = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor payload contains non-finite values")
    return arr


def _check_bandwidth(h):
    h = float(h)
    if not np.isfinite(h) or h <= 0.0:
        raise ValueError(f"bandwidth must be a positive finite real, got {h}")
    return h


def log_gaussian_kernel(h, diff):
    """Log of the normalized isotropic Gaussian kernel at offset ``diff``.

    log N(diff; 0, h^2 I) = -(l/2) log(2 pi h^2) - ||diff||^2 / (2 h^2).
    Always finite for finite inputs (no linear-domain exponential).
    """
    h = _check_bandwidth(h)
    d = np.atleast_1d(np.asarray(diff, dtype=np.float64)).ravel()
    if not np.all(np.isfinite(d)):
        raise ValueError("diff must be finite")
    return float(-0.5 * d.size * (_LOG_2PI + 2.0 * np.log(h))
                 - (d @ d) / (2.0 * h * h))


class GaussianKde:
    """Kernel density estimate: support samples z_1..z_m plus bandwidth h.

    Density is the mean of normalized isotropic Gaussian kernels centered at
    the support points. Evaluations run in the log domain via log-sum-exp.
    """

    __slots__ = ("_support", "_bandwidth")

    def __init__(self, support, bandwidth):
        if not isinstance(support, SampleSet):
            support = SampleSet(support)
        self._support = support
        self._bandwidth = _check_bandwidth(bandwidth)

    @property
    def support(self):
        return self._support

    @property
    def bandwidth(self):
        return self._bandwidth

    @property
    def dim(self):
        return self._support.dim

    def _check_queries(self, queries):
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q.reshape(1, -1)
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise ValueError(
                f"query dimension {q.shape[-1]} does not match support dimension {self.dim}")
        if not np.all(np.isfinite(q)):
            raise ValueError("queries must be finite")
        return q

    def log_density(self, query):
        """Log KDE density at a single point."""
        return float(self.log_density_batch(query)[0])

    def log_density_batch(self, queries):
        """Log KDE density for each row of ``queries``."""
        q = self._check_queries(queries)
        log_p, _, _ = backend.kde_panel(self._support.points, q, self._bandwidth)
        return log_p


class TargetDistribution:
    """Analytic latent target: standard normal or isotropic Gaussian mixture."""

    __slots__ = ("_kind", "_weights", "_means", "_stddevs")

    def __init__(self, kind, weights, means, stddevs):
        means = np.array(means, dtype=np.float64, ndmin=2)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        stddevs = np.asarray(stddevs, dtype=np.float64).ravel()
        k = means.shape[0]
        if weights.shape != (k,) or stddevs.shape != (k,):
            raise ValueError("weights, means, and stddevs must have one entry per component")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(weights))
                and np.all(np.isfinite(stddevs))):
            raise ValueError("mixture parameters must be finite")
        if np.any(weights <= 0.0) or np.any(weights > 1.0):
            raise ValueError("mixture weights must lie in (0, 1]")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"mixture weights must sum to 1 within {_WEIGHT_TOL}")
        if np.any(stddevs <= 0.0):
            raise ValueError("component stddevs must be positive")
        for arr in (means, weights, stddevs):
            arr.setflags(write=False)
        self._kind = kind
        self._weights = weights
        self._means = means
        self._stddevs = stddevs

    @classmethod
    def standard_normal(cls, dim):
        """N(0, I) in ``dim`` dimensions."""
        if dim < 1:
            raise ValueError("dim must be >= 1")
        return cls("standard-normal", [1.0], np.zeros((1, dim)), [1.0])

    @classmethod
    def mixture_of_gaussians(cls, components):
        """Isotropic mixture from (weight, mean, stddev) triples."""
        if not components:
            raise ValueError("mixture needs at least one component")
        weights = [c[0] for c in components]
        means = [np.atleast_1d(np.asarray(c[1], dtype=np.float64)) for c in components]
        stddevs = [c[2] for c in components]
        dims = {m.shape[0] for m in means}
        if len(dims) != 1:
            raise ValueError("all component means must share one dimension")
        return cls("mixture", weights, np.vstack(means), stddevs)

    @property
    def kind(self):
        return self._kind

    @property
    def dim(self):
        return self._means.shape[1]

    @property
    def n_components(self):
        return self._means.shape[0]

    @property
    def weights(self):
        return self._weights

    @property
    def means(self):
        return self._means

    @property
    def stddevs(self):
        return self._stddevs

    def _check_queries(self, queries):
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q.reshape(1, -1)
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise ValueError(
                f"query dimension {q.shape[-1]} does not match target dimension {self.dim}")
        return q

    def component_log_densities(self, queries):
        """(n, k) array of log(w_k * N(q; mu_k, sigma_k^2 I)) per component."""
        q = self._check_queries(queries)
        diff = q[:, None, :] - self._means[None, :, :]
        sq = np.einsum("nkj,nkj->nk", diff, diff)
        var = self._stddevs ** 2
        return (np.log(self._weights)
                - 0.5 * self.dim * (_LOG_2PI + 2.0 * np.log(self._stddevs))
                - sq / (2.0 * var))

    def log_density_batch(self, queries):
        """Exact log-density of the target at each query row."""
        comp = self.component_log_densities(queries)
        if comp.shape[1] == 1:
            return comp[:, 0]
        return logsumexp(comp, axis=1)

    def log_density(self, query):
        return float(self.log_density_batch(query)[0])

    def score_batch(self, queries):
        """Gradient of log p_t at each query row (analytic mixture score)."""
        q = self._check_queries(queries)
        comp = self.component_log_densities(q)
        resp = np.exp(comp - logsumexp(comp, axis=1, keepdims=True))
        inv_var = 1.0 / self._stddevs ** 2
        # sum_k r_k (mu_k - q) / sigma_k^2
        weighted = resp * inv_var[None, :]
        return weighted @ self._means - weighted.sum(axis=1, keepdims=True) * q

    def sample(self, n, rng, return_labels=False):
        """Draw n i.i.d. samples; mixtures pick a component by weight first."""
        n = int(n)
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.n_components == 1:
            labels = np.zeros(n, dtype=np.int64)
            pts = self._means[0] + self._stddevs[0] * rng.standard_normal((n, self.dim))
        else:
            labels = rng.choice(self.n_components, size=n, p=self._weights)
            noise = rng.standard_normal((n, self.dim))
            pts = self._means[labels] + self._stddevs[labels, None] * noise
        out = SampleSet(pts)
        if return_labels:
            return out, labels
        return out


def whiten(samples):
    """PCA-whiten a sample set: zero mean, identity sample covariance.

    Rotates onto covariance eigenvectors and rescales by 1/sqrt(eigenvalue),
    with eigenvalues floored at 1e-8. Raises NumericsError when every
    eigenvalue sits below the floor (fully degenerate covariance).
    """
    x = samples.points
    n, dim = x.shape
    if n <= dim:
        raise ValueError(f"whitening needs more samples ({n}) than dimensions ({dim})")
    mu = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    evals, evecs = np.linalg.eigh(cov)
    if evals.max() < _EIG_FLOOR:
        raise NumericsError("sample covariance is degenerate (all eigenvalues below floor)")
    scales = 1.0 / np.sqrt(np.maximum(evals, _EIG_FLOOR))
    return SampleSet((x - mu) @ evecs * scales)
