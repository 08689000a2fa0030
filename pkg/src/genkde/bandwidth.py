"""Optimal-bandwidth solvers.

Two routes to the JSD-maximizing bandwidth for a given (dimension, sample
count): bisection root trapping on dJSD/dh, and the fixed-point rearrangement
of the same stationarity condition. A third fixed point minimizes the
leave-one-out KDE entropy of a concrete sample set.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .density import GaussianKde, SampleSet, TargetDistribution
from .divergence import djsd_dh
from .exceptions import NumericsError

BRACKET = (0.01, 2.0)
BRACKET_TOL = 1e-3
SATURATION_H = 1.0
FIXED_POINT_TOL = 1e-4
FIXED_POINT_MAX_ITER = 100
FIXED_POINT_DAMPING = 0.5


@dataclass(frozen=True)
class BandwidthResult:
    """Outcome of one bandwidth solve.

    saturated means h_opt reached the >= 1.0 regime for a standard-normal
    target (reported as "> 1.0" in table output), or the bracket top when
    no sign change exists.
    """

    h_opt: float
    iterations: int
    converged: bool
    saturated: bool


@dataclass(frozen=True)
class BandwidthSummary:
    """Mean and sample std of h_opt across independent trials."""

    h_mean: float
    h_std: float
    saturated: bool
    trials: tuple


def _draw_sets(dim, m, target, rng):
    """Support plus the two evaluation batches, all size m from the target."""
    support = target.sample(m, rng)
    encoded = target.sample(m, rng)
    witness = target.sample(m, rng)
    return support, encoded, witness


def _check_lm(dim, m):
    if dim < 1:
        raise ValueError("latent dimension must be >= 1")
    if m < 10:
        raise ValueError("KDE sample count must be >= 10")


def _root_trap_trial(dim, m, target, rng):
    support, encoded, witness = _draw_sets(dim, m, target, rng)

    def deriv(h):
        return djsd_dh(GaussianKde(support, h), target, encoded, witness)

    lo, hi = BRACKET
    f_lo = deriv(lo)
    if f_lo < 0.0:
        raise NumericsError(
            f"dJSD/dh is negative at the bracket bottom h={lo}; no maximum inside the bracket")
    f_hi = deriv(hi)
    if f_hi > 0.0:
        # still rising at the bracket top: saturated cell
        return BandwidthResult(h_opt=hi, iterations=0, converged=False, saturated=True)

    iterations = 0
    while hi - lo >= BRACKET_TOL:
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1
    h_opt = 0.5 * (lo + hi)
    return BandwidthResult(h_opt=h_opt, iterations=iterations, converged=True,
                           saturated=h_opt >= SATURATION_H)


def optimal_bandwidth_root_trap(dim, m, target=None, n_trials=10, rng=None):
    """JSD-optimal bandwidth by bisection, aggregated over independent trials.

    Per trial: draw a KDE support and two size-m evaluation batches from the
    target, then bisect dJSD/dh on [0.01, 2.0] until the bracket is narrower
    than 1e-3. No sign change with a positive derivative at the top reports a
    saturated result at h = 2.0.
    """
    _check_lm(dim, m)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if target is None:
        target = TargetDistribution.standard_normal(dim)
    if rng is None:
        rng = np.random.default_rng()
    trials = tuple(_root_trap_trial(dim, m, target, rng) for _ in range(n_trials))
    values = np.array([t.h_opt for t in trials])
    h_mean = float(values.mean())
    h_std = float(values.std(ddof=1)) if n_trials > 1 else 0.0
    return BandwidthSummary(h_mean=h_mean, h_std=h_std,
                            saturated=h_mean >= SATURATION_H, trials=trials)


def _fixed_point_stats(support, target, batch, h):
    """E[msd], E[w_s * msd], E[w_s] for one batch at bandwidth h."""
    log_s, msd, _ = backend.kde_panel(support.points, batch.points, h, want_sqdist=True)
    log_t = target.log_density_batch(batch.points)
    w_s = np.exp(log_s - np.logaddexp(log_t, log_s))
    return float(np.mean(msd)), float(np.mean(w_s * msd)), float(np.mean(w_s))


def _iterate_fixed_point(update, h0, tol, max_iter):
    """Damped fixed-point driver shared by the JSD and entropy solvers.

    Applies half-step damping whenever the update direction flips sign, and
    stops once |h_new - h| < tol.
    """
    h = float(h0)
    prev_delta = 0.0
    for iteration in range(1, max_iter + 1):
        h_sq = update(h)
        if not np.isfinite(h_sq) or h_sq <= 0.0:
            raise NumericsError(
                f"fixed-point update produced h^2 = {h_sq} at h = {h} (degenerate configuration)")
        delta = np.sqrt(h_sq) - h
        if prev_delta * delta < 0.0:
            delta *= FIXED_POINT_DAMPING
        h_new = h + delta
        if abs(h_new - h) < tol:
            return h_new, iteration, True
        prev_delta = delta
        h = h_new
    return h, max_iter, False


def optimal_bandwidth_fixed_point(dim, m, target=None, rng=None, h0=0.5,
                                  tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER):
    """JSD-optimal bandwidth via the fixed-point rearrangement of dJSD/dh = 0.

    h^2 <- F^{-1} (E[msd'] - E[w_s' msd'] - E[w_s'' msd'']) with
    F = l (1 - E[w_s'] - E[w_s'']); primes mark the encoded batch, double
    primes the target batch. Raises NumericsError when F <= 0.
    """
    _check_lm(dim, m)
    if not 0.0 < h0 <= BRACKET[1]:
        raise ValueError(f"h0 must lie in (0, {BRACKET[1]}]")
    if target is None:
        target = TargetDistribution.standard_normal(dim)
    if rng is None:
        rng = np.random.default_rng()
    support, encoded, witness = _draw_sets(dim, m, target, rng)

    def update(h):
        msd_e, wmsd_e, ws_e = _fixed_point_stats(support, target, encoded, h)
        msd_t, wmsd_t, ws_t = _fixed_point_stats(support, target, witness, h)
        factor = dim * (1.0 - ws_e - ws_t)
        if factor <= 0.0:
            raise NumericsError(
                f"fixed-point factor F = {factor:.6g} <= 0 at h = {h:.6g}; "
                "the KDE dominates the target everywhere (degenerate configuration)")
        return (msd_e - wmsd_e - wmsd_t) / factor

    h_opt, iterations, converged = _iterate_fixed_point(update, h0, tol, max_iter)
    return BandwidthResult(h_opt=h_opt, iterations=iterations, converged=converged,
                           saturated=h_opt >= SATURATION_H)


def entropy_bandwidth_fixed_point(samples, h0=None, tol=FIXED_POINT_TOL,
                                  max_iter=FIXED_POINT_MAX_ITER):
    """Entropy-minimizing bandwidth for a sample set, by fixed-point iteration.

    h^2 <- (1/(l m)) sum_i [sum_{j != i} ||z_j - z_i||^2 G_h / sum_{j != i} G_h],
    the stationarity condition of the leave-one-out KDE entropy. An
    all-duplicate sample set drives h^2 to 0 and raises NumericsError.
    """
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    m, dim = len(samples), samples.dim
    if m < 2:
        raise ValueError("entropy bandwidth needs at least 2 samples")
    if h0 is None:
        # Scott-style seed; only the starting point, not the answer
        spread = float(np.sqrt(samples.points.var(axis=0, ddof=1).mean()))
        h0 = max(spread, 1e-6) * m ** (-1.0 / (dim + 4))

    def update(h):
        _, msd = backend.loo_panel(samples.points, h, want_sqdist=True)
        return float(np.mean(msd)) / dim

    h_opt, iterations, converged = _iterate_fixed_point(update, h0, tol, max_iter)
    return BandwidthResult(h_opt=h_opt, iterations=iterations, converged=converged,
                           saturated=False)


@dataclass(frozen=True)
class TableCell:
    dim: int
    m: int
    summary: BandwidthSummary


def bandwidth_table(dims, sample_sizes, n_trials=10, seed=42, method="root-trap"):
    """Grid of bandwidth summaries over dimensions x sample sizes.

    Each cell draws from an independent sub-seeded generator, so the grid is
    reproducible regardless of evaluation order. method is "root-trap" or
    "fixed-point".
    """
    if method not in ("root-trap", "fixed-point"):
        raise ValueError(f"unknown method {method!r}")
    cells = []
    for dim in dims:
        target = TargetDistribution.standard_normal(dim)
        for m in sample_sizes:
            rng = np.random.default_rng([seed, dim, m])
            if method == "root-trap":
                summary = optimal_bandwidth_root_trap(dim, m, target, n_trials, rng)
            else:
                results = tuple(
                    optimal_bandwidth_fixed_point(dim, m, target, rng)
                    for _ in range(n_trials))
                values = np.array([r.h_opt for r in results])
                summary = BandwidthSummary(
                    h_mean=float(values.mean()),
                    h_std=float(values.std(ddof=1)) if n_trials > 1 else 0.0,
                    saturated=bool(values.mean() >= SATURATION_H),
                    trials=results)
            cells.append(TableCell(dim=dim, m=m, summary=summary))
    return cells


def table_to_csv(cells):
    """Render a bandwidth grid: rows l, one mean±std column per m, plus a
    column listing the saturated m values (cells render as ">1.0")."""
    dims = sorted({c.dim for c in cells})
    sizes = sorted({c.m for c in cells})
    lookup = {(c.dim, c.m): c.summary for c in cells}
    lines = ["l," + ",".join(f"m={m}" for m in sizes) + ",saturated"]
    for dim in dims:
        row = [str(dim)]
        saturated = []
        for m in sizes:
            summary = lookup.get((dim, m))
            if summary is None:
                row.append("")
                continue
            if summary.saturated:
                row.append(">1.0")
                saturated.append(str(m))
            else:
                row.append(f"{summary.h_mean:.3f}±{summary.h_std:.3f}")
        row.append(";".join(saturated))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
