"""Diagnostics: leave-one-out KDE entropy, the latent-variance law check,
the separation-vs-divergence correlation study, and Pearson scoring."""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as t_dist

from . import backend
from .bandwidth import entropy_bandwidth_fixed_point, optimal_bandwidth_root_trap
from .density import GaussianKde, SampleSet, TargetDistribution, whiten
from .divergence import jsd_estimate


def kde_entropy(samples, h):
    """Leave-one-out KDE entropy of a sample set, in nats.

    -(1/m) sum_i log[(1/(m-1)) sum_{j != i} N(z_j - z_i; 0, h^2 I)],
    with the inner reduction done by log-sum-exp.
    """
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    if len(samples) < 2:
        raise ValueError("entropy needs at least 2 samples")
    h = float(h)
    if not np.isfinite(h) or h <= 0.0:
        raise ValueError("bandwidth must be a positive real")
    log_p, _ = backend.loo_panel(samples.points, h)
    return -float(np.mean(log_p))


@dataclass(frozen=True)
class VarianceLawReport:
    """Per-dimension latent variance against the predicted 1 - h^2."""

    per_dim_variance: np.ndarray
    per_dim_mean: np.ndarray
    predicted: float
    max_abs_dev: float


def latent_variance_law_check(encoder, holdout, h):
    """Encode a holdout set and compare raw per-dimension variance to 1 - h^2.

    Valid for training against a standard-normal target with h < 1; at h >= 1
    the predicted latent distribution degenerates and this raises ValueError.
    This is a diagnostic: it reports deviations, it does not assert them.
    """
    h = float(h)
    if not 0.0 < h < 1.0:
        raise ValueError(f"variance law requires 0 < h < 1, got {h} (degenerate at h >= 1)")
    if not isinstance(holdout, SampleSet):
        holdout = SampleSet(holdout)
    codes, _ = encoder.forward(holdout.points)
    predicted = 1.0 - h * h
    variance = codes.var(axis=0, ddof=1)
    return VarianceLawReport(
        per_dim_variance=variance,
        per_dim_mean=codes.mean(axis=0),
        predicted=predicted,
        max_abs_dev=float(np.max(np.abs(variance - predicted))),
    )


def pearson(x, y):
    """Product-moment correlation with a two-sided t-test p-value.

    p comes from t = r sqrt((n-2) / (1-r^2)) against the t distribution with
    n-2 degrees of freedom; |r| = 1 maps to p = 0.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size < 3:
        raise ValueError("pearson needs two equal-length series of length >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson is undefined for zero-variance input")
    r = float(xc @ yc) / np.sqrt(sx * sy)
    r = min(1.0, max(-1.0, r))
    n = x.size
    if abs(r) == 1.0:
        return r, 0.0
    t_stat = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(t_dist.sf(abs(t_stat), n - 2))
    return r, p


@dataclass(frozen=True)
class CorrelationStudyConfig:
    """Grid for the separation study: dims x sample sizes, separations s,
    trials per (s, trial) cell."""

    dims: tuple
    sample_sizes: tuple
    separations: tuple = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    trials: int = 20
    seed: int = 42

    def validate(self):
        if not self.dims or not self.sample_sizes:
            raise ValueError("dims and sample_sizes must be nonempty")
        seps = tuple(self.separations)
        if list(seps) != sorted(seps) or 0.0 not in seps:
            raise ValueError("separations must be ascending and include 0")
        if self.trials < 2:
            raise ValueError("trials must be >= 2")


@dataclass(frozen=True)
class CorrelationCell:
    """One (l, m) cell: per-record JSD values and the Pearson score."""

    dim: int
    m: int
    h_opt: float
    records: tuple  # (s, trial, jsd)
    pearson_r: float
    p_value: float

    def per_separation_stats(self):
        """{s: (mean, std)} over trials."""
        stats = {}
        values = {}
        for s, _, jsd in self.records:
            values.setdefault(s, []).append(jsd)
        for s, vals in values.items():
            arr = np.asarray(vals)
            stats[s] = (float(arr.mean()), float(arr.std(ddof=1)))
        return stats


def _two_mode_mixture(dim, separation):
    """Equal-weight pair of unit Gaussians at +-(s/2) along the first axis."""
    offset = np.zeros(dim)
    offset[0] = separation / 2.0
    return TargetDistribution.mixture_of_gaussians(
        [(0.5, offset, 1.0), (0.5, -offset, 1.0)])


def _default_estimator(dim, m, separation, h, rng):
    """Whitened two-mode draw scored against the standard normal.

    The m whitened draws serve as both the KDE support and the encoded-side
    batch; the target-side batch is a fresh standard-normal draw.
    """
    mixture = _two_mode_mixture(dim, separation)
    draws = whiten(mixture.sample(m, rng))
    reference = TargetDistribution.standard_normal(dim)
    witness = reference.sample(m, rng)
    kde = GaussianKde(draws, h)
    return jsd_estimate(kde, reference, draws, witness).normalized


def run_correlation_study(cfg, estimator=None):
    """Score how the estimated divergence tracks the mode separation.

    Per (l, m) cell: solve the cell's bandwidth once against the standard
    normal, then for every (separation, trial) evaluate the estimator and
    compute the Pearson correlation between s and the divergence over all
    records. estimator(dim, m, s, h, rng) -> float is injectable so the
    harness itself can be validated on synthetic inputs.
    """
    cfg.validate()
    if estimator is None:
        estimator = _default_estimator
    cells = []
    for dim in cfg.dims:
        for m in cfg.sample_sizes:
            solve_rng = np.random.default_rng([cfg.seed, dim, m, 0])
            h = optimal_bandwidth_root_trap(
                dim, m, TargetDistribution.standard_normal(dim),
                n_trials=3, rng=solve_rng).h_mean
            records = []
            for s_index, s in enumerate(cfg.separations):
                for trial in range(cfg.trials):
                    rng = np.random.default_rng([cfg.seed, dim, m, s_index, trial])
                    records.append((float(s), trial, float(estimator(dim, m, s, h, rng))))
            xs = [rec[0] for rec in records]
            ys = [rec[2] for rec in records]
            r, p = pearson(xs, ys)
            cells.append(CorrelationCell(dim=dim, m=m, h_opt=h,
                                         records=tuple(records),
                                         pearson_r=r, p_value=p))
    return cells


def study_records_csv(cells):
    """Long-format CSV: one row per (l, m, s, trial) JSD record."""
    lines = ["l,m,s,trial,jsd"]
    for cell in cells:
        for s, trial, jsd in cell.records:
            lines.append(f"{cell.dim},{cell.m},{s:g},{trial},{jsd:.10g}")
    return "\n".join(lines) + "\n"


def study_summary_csv(cells):
    """Summary CSV: one row per (l, m) cell with r and p."""
    lines = ["l,m,h_opt,pearson_r,p_value"]
    for cell in cells:
        lines.append(f"{cell.dim},{cell.m},{cell.h_opt:.6g},"
                     f"{cell.pearson_r:.6g},{cell.p_value:.6g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EntropyRowCell:
    m: int
    entropy_mean: float
    entropy_std: float
    h_mean: float


def standard_normal_entropy_row(dim, sample_sizes, n_trials=5, seed=42):
    """Reference entropies of standard-normal draws at entropy-optimal h.

    One cell per sample size, averaged over n_trials independent draws; the
    layout mirrors the published reference row for this quantity.
    """
    target = TargetDistribution.standard_normal(dim)
    cells = []
    for m in sample_sizes:
        values = []
        bandwidths = []
        for trial in range(n_trials):
            rng = np.random.default_rng([seed, m, trial])
            draws = target.sample(m, rng)
            res = entropy_bandwidth_fixed_point(draws)
            bandwidths.append(res.h_opt)
            values.append(kde_entropy(draws, res.h_opt))
        arr = np.asarray(values)
        cells.append(EntropyRowCell(
            m=m,
            entropy_mean=float(arr.mean()),
            entropy_std=float(arr.std(ddof=1)) if n_trials > 1 else 0.0,
            h_mean=float(np.mean(bandwidths)),
        ))
    return cells


def entropy_row_csv(cells):
    lines = ["m," + ",".join(str(c.m) for c in cells)]
    lines.append("entropy," + ",".join(f"{c.entropy_mean:.4f}±{c.entropy_std:.4f}"
                                       for c in cells))
    lines.append("h," + ",".join(f"{c.h_mean:.4f}" for c in cells))
    return "\n".join(lines) + "\n"
