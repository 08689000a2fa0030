"""Synthetic benchmark data: a low-dimensional Gaussian-mixture source
embedded in a higher-dimensional data space by a fixed orthonormal linear
map, plus small isotropic noise. The generating density is known, which makes
the benchmark usable as an oracle for novelty scoring and mode assignment.
"""

from dataclasses import dataclass

import numpy as np

from .density import SampleSet, TargetDistribution


@dataclass(frozen=True)
class SyntheticBatch:
    data: SampleSet
    labels: np.ndarray
    sources: np.ndarray
    source_log_density: np.ndarray


class SyntheticBenchmark:
    """Fixed embedding of a planar Gaussian mixture into data space.

    Cluster means sit on a circle so every pair is separated by several
    source stddevs; the orthonormal embedding preserves those distances in
    data space.
    """

    def __init__(self, data_dim=10, source_dim=2, n_clusters=3, radius=3.0,
                 source_std=0.5, noise_std=0.02, seed=42):
        if data_dim < source_dim:
            raise ValueError("data_dim must be >= source_dim")
        rng = np.random.default_rng(seed)
        angles = 2.0 * np.pi * np.arange(n_clusters) / n_clusters
        means = np.zeros((n_clusters, source_dim))
        means[:, 0] = radius * np.cos(angles)
        means[:, 1 % source_dim] = radius * np.sin(angles)
        weight = 1.0 / n_clusters
        weights = [weight] * (n_clusters - 1) + [1.0 - weight * (n_clusters - 1)]
        self.source_mixture = TargetDistribution.mixture_of_gaussians(
            [(w, mu, source_std) for w, mu in zip(weights, means)])
        basis, _ = np.linalg.qr(rng.standard_normal((data_dim, source_dim)))
        self.embed = basis.T  # (source_dim, data_dim), orthonormal rows
        self.noise_std = float(noise_std)
        self.data_dim = data_dim

    def sample(self, n, rng):
        """Draw a batch: data rows, cluster labels, sources, and the source
        mixture's log-density at each generating point (the ranking oracle)."""
        sources, labels = self.source_mixture.sample(n, rng, return_labels=True)
        src = sources.points
        data = src @ self.embed
        if self.noise_std > 0.0:
            data = data + self.noise_std * rng.standard_normal(data.shape)
        return SyntheticBatch(
            data=SampleSet(data),
            labels=labels,
            sources=src,
            source_log_density=self.source_mixture.log_density_batch(src),
        )
