"""genkde: KDE-based JSD estimation with analytically optimal bandwidths,
latent distribution matching for autoencoders, and density-based novelty
scoring."""

from .analysis import kde_entropy, latent_variance_law_check, pearson, run_correlation_study
from .bandwidth import (
    BandwidthResult,
    BandwidthSummary,
    entropy_bandwidth_fixed_point,
    optimal_bandwidth_fixed_point,
    optimal_bandwidth_root_trap,
)
from .density import GaussianKde, SampleSet, TargetDistribution, log_gaussian_kernel, whiten
from .divergence import JsdEstimate, djsd_dh, jsd_estimate, jsd_grad_queries
from .exceptions import NumericsError
from .nn import AdamState, Autoencoder, Mlp, adam_step, load_checkpoint, save_checkpoint
from .novelty import log_det_first_fundamental, novelty_score, rank_outliers
from .trainer import TrainConfig, TrainReport, assign_modes, train_gen

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Autoencoder",
    "BandwidthResult",
    "BandwidthSummary",
    "GaussianKde",
    "JsdEstimate",
    "Mlp",
    "NumericsError",
    "SampleSet",
    "TargetDistribution",
    "TrainConfig",
    "TrainReport",
    "__version__",
    "adam_step",
    "assign_modes",
    "djsd_dh",
    "entropy_bandwidth_fixed_point",
    "jsd_estimate",
    "jsd_grad_queries",
    "kde_entropy",
    "latent_variance_law_check",
    "load_checkpoint",
    "log_det_first_fundamental",
    "log_gaussian_kernel",
    "novelty_score",
    "optimal_bandwidth_fixed_point",
    "optimal_bandwidth_root_trap",
    "pearson",
    "rank_outliers",
    "run_correlation_study",
    "save_checkpoint",
    "train_gen",
    "whiten",
]
