"""KDE-based Jensen-Shannon divergence: estimate, bandwidth derivative, and
gradients with respect to the encoded query points.

All expectations are plain sample means over the supplied batches, evaluated
in the log domain. Ratios such as sum_i G_i ||.||^2 / sum_i G_i are computed
as softmax-weighted averages so they stay finite when every kernel value
underflows.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .density import GaussianKde, SampleSet, TargetDistribution

_LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class JsdEstimate:
    """Two-term KDE JSD value together with its rescaled form.

    raw_two_term omits the additive/multiplicative constants; normalized
    restores the true JSD scale as log 2 + raw_two_term / 2, which lies in
    [0, log 2] up to estimator sampling noise.
    """

    raw_two_term: float
    normalized: float
    term_encoded: float
    term_target: float


def _validate(kde, target, *batches):
    dim = kde.dim
    if target.dim != dim:
        raise ValueError(f"target dimension {target.dim} != KDE dimension {dim}")
    for batch in batches:
        if len(batch) < 1:
            raise ValueError("evaluation batches must be nonempty")
        if batch.dim != dim:
            raise ValueError(f"batch dimension {batch.dim} != KDE dimension {dim}")


def _log_ratio_weights(kde, target, batch, want_sqdist=False, want_diff=False):
    """Shared per-query quantities: log S, log p_t, and kernel moments."""
    log_s, msd, wdiff = backend.kde_panel(
        kde.support.points, batch.points, kde.bandwidth,
        want_sqdist=want_sqdist, want_diff=want_diff)
    log_t = target.log_density_batch(batch.points)
    return log_s, log_t, msd, wdiff


def jsd_estimate(kde, target, encoded_batch, target_batch):
    """Evaluate the two-term KDE JSD between the KDE and the analytic target.

    term_encoded averages log[S / (p_t + S)] over the encoded batch and
    term_target averages log[p_t / (p_t + S)] over the target batch, where
    S is the KDE density.
    """
    _validate(kde, target, encoded_batch, target_batch)
    log_s_e, log_t_e, _, _ = _log_ratio_weights(kde, target, encoded_batch)
    log_s_t, log_t_t, _, _ = _log_ratio_weights(kde, target, target_batch)
    term_encoded = float(np.mean(log_s_e - np.logaddexp(log_t_e, log_s_e)))
    term_target = float(np.mean(log_t_t - np.logaddexp(log_t_t, log_s_t)))
    raw = term_encoded + term_target
    return JsdEstimate(
        raw_two_term=raw,
        normalized=_LOG2 + 0.5 * raw,
        term_encoded=term_encoded,
        term_target=term_target,
    )


def djsd_dh(kde, target, encoded_batch, target_batch):
    """Analytic derivative of the two-term JSD value with respect to h.

    Five expectation terms: over the encoded batch, the derivative of
    log S minus the S-part of the derivative of log(p_t + S); over the
    target batch, minus the same S-part. Each term uses the softmax-weighted
    mean squared distance msd = sum_i G_i ||q - z_i||^2 / sum_i G_i and the
    blend weight w_s = S / (p_t + S). Deterministic given the input sets.
    """
    _validate(kde, target, encoded_batch, target_batch)
    h = kde.bandwidth
    dim = kde.dim

    log_s_e, log_t_e, msd_e, _ = _log_ratio_weights(
        kde, target, encoded_batch, want_sqdist=True)
    log_s_t, log_t_t, msd_t, _ = _log_ratio_weights(
        kde, target, target_batch, want_sqdist=True)
    w_s_e = np.exp(log_s_e - np.logaddexp(log_t_e, log_s_e))
    w_s_t = np.exp(log_s_t - np.logaddexp(log_t_t, log_s_t))

    term1 = float(np.mean(msd_e / h ** 2 - dim)) / h
    term2 = -float(np.mean(w_s_e * msd_e)) / h ** 3
    term3 = float(np.mean(w_s_e)) * dim / h
    term4 = -float(np.mean(w_s_t * msd_t)) / h ** 3
    term5 = float(np.mean(w_s_t)) * dim / h
    return term1 + term2 + term3 + term4 + term5


def jsd_grad_queries(kde, target, encoded_batch):
    """Gradient of the encoded-batch JSD term with respect to each query.

    Row j is the gradient of (1/n) sum log[S(z') / (p_t(z') + S(z'))] with
    respect to z'_j (only the j-th summand depends on it, so the 1/n batch
    scaling is baked in). grad log S = -wdiff / h^2 with wdiff the
    softmax-weighted mean offset; the p_t part uses the analytic score.
    """
    _validate(kde, target, encoded_batch)
    h = kde.bandwidth
    n = len(encoded_batch)

    log_s, log_t, _, wdiff = _log_ratio_weights(
        kde, target, encoded_batch, want_diff=True)
    log_mix = np.logaddexp(log_t, log_s)
    w_t = np.exp(log_t - log_mix)[:, None]
    w_s = np.exp(log_s - log_mix)[:, None]

    grad_log_s = -wdiff / h ** 2
    score = target.score_batch(encoded_batch.points)
    grad_log_mix = w_t * score + w_s * grad_log_s
    return (grad_log_s - grad_log_mix) / n
