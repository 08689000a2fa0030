"""Data-space probability of a sample under a trained autoencoder.

The in-manifold part is the latent density corrected by the decoder
Jacobian's volume element (first fundamental form); the off-manifold part is
an isotropic Gaussian on the reconstruction residual. The outlier score is
the negative log of the assembled probability.
"""

from dataclasses import dataclass

import numpy as np

from .density import SampleSet
from .exceptions import NumericsError

_LOG_2PI = float(np.log(2.0 * np.pi))
_EIG_TINY = 1e-300


@dataclass(frozen=True)
class NoveltyScore:
    """Outlier score -log p(x) and its three additive log components."""

    score: float
    log_latent: float
    log_jacobian_penalty: float
    log_off_manifold: float


def decoder_jacobian(decoder, z):
    """Exact (data_dim, latent_dim) Jacobian of the decoder at z."""
    return decoder.jacobian(z)


def log_det_first_fundamental(jacobian):
    """0.5 * log|det(A^T A)| for a tall Jacobian A, via its eigenvalues.

    Raises NumericsError when A^T A is rank-deficient (an eigenvalue at or
    below the representable floor), i.e. the decoded manifold is singular.
    """
    a = np.asarray(jacobian, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ValueError("jacobian must be a tall (data_dim >= latent_dim) matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("jacobian must be finite")
    gram = a.T @ a
    evals = np.linalg.eigvalsh(gram)
    if evals.min() <= _EIG_TINY:
        raise NumericsError("decoder Jacobian is rank-deficient (singular manifold)")
    return 0.5 * float(np.sum(np.log(evals)))


def novelty_score(model, target, x, sigma):
    """Score one data-space sample: z' = E(x), x' = D(z'), then

    -log p(x) = -[log p_t(z') - 0.5 log|det B| + log N(x; x', sigma^2 I)].
    """
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0.0:
        raise ValueError("sigma must be a positive real")
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.data_dim:
        raise ValueError(f"sample has dim {x.shape[0]}, model expects {model.data_dim}")
    if target.dim != model.latent_dim:
        raise ValueError("target dimension must match the model's latent dimension")

    z = model.encode(x).ravel()
    x_rec = model.decode(z).ravel()
    log_latent = target.log_density(z)
    log_jacobian_penalty = -log_det_first_fundamental(model.decoder.jacobian(z))
    resid = x - x_rec
    log_off_manifold = float(
        -0.5 * x.size * (_LOG_2PI + 2.0 * np.log(sigma))
        - (resid @ resid) / (2.0 * sigma * sigma))
    return NoveltyScore(
        score=-(log_latent + log_jacobian_penalty + log_off_manifold),
        log_latent=log_latent,
        log_jacobian_penalty=log_jacobian_penalty,
        log_off_manifold=log_off_manifold,
    )


def novelty_scores(model, target, batch, sigma):
    """Score every row of a sample set; scoring is per-sample pure inference."""
    if not isinstance(batch, SampleSet):
        batch = SampleSet(batch)
    return [novelty_score(model, target, row, sigma) for row in batch.points]


def calibrate_sigma(model, calibration):
    """Default off-manifold scale: root mean squared per-coordinate residual
    over a calibration split."""
    if not isinstance(calibration, SampleSet):
        calibration = SampleSet(calibration)
    resid = model.reconstruct(calibration.points) - calibration.points
    return float(np.sqrt(np.mean(resid * resid)))


def rank_outliers(model, target, batch, sigma, k):
    """Indices of the k lowest and k highest outlier scores.

    Stable ascending sort with index-order tie-break; the highest-k block is
    returned most-outlying first.
    """
    if not isinstance(batch, SampleSet):
        batch = SampleSet(batch)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(batch) < 2 * k:
        raise ValueError(f"batch of {len(batch)} is too small for 2k = {2 * k}")
    scores = np.array([s.score for s in novelty_scores(model, target, batch, sigma)])
    order = np.argsort(scores, kind="stable")
    return order[:k], order[-k:][::-1]


def scores_csv(scores):
    """CSV of (index, score, log_latent, log_jacobian_penalty,
    log_off_manifold), sorted ascending by score."""
    order = np.argsort([s.score for s in scores], kind="stable")
    lines = ["index,score,log_latent,log_jacobian_penalty,log_off_manifold"]
    for idx in order:
        s = scores[idx]
        lines.append(f"{idx},{s.score:.10g},{s.log_latent:.10g},"
                     f"{s.log_jacobian_penalty:.10g},{s.log_off_manifold:.10g}")
    return "\n".join(lines) + "\n"
