"""End-to-end autoencoder training with the KDE-based latent penalty.

Minibatch SGD on reconstruction + lambda * (encoded-side JSD term), with the
KDE support buffer re-encoded from a fixed subset of the training data every
``lag_interval`` minibatches. Supports standard-normal and mixture targets,
including the semi-supervised variant where labeled samples are penalized
against their class component only.
"""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .bandwidth import optimal_bandwidth_root_trap
from .density import GaussianKde, SampleSet, TargetDistribution
from .divergence import jsd_grad_queries
from .exceptions import NumericsError
from .nn import AdamState, Autoencoder, Mlp, adam_step

GRAD_CLIP_NORM = 10.0


@dataclass
class TrainConfig:
    """Hyperparameters for train_gen.

    bandwidth is "auto" (solve the JSD-optimal value at startup) or an
    explicit positive float. label_fraction > 0 enables the semi-supervised
    penalty and requires per-sample labels plus a mixture target with one
    component per class.
    """

    latent_dim: int
    kde_support_size: int
    target: TargetDistribution
    minibatch_size: int = 64
    lag_interval: int = 10
    jsd_weight: float = 0.01
    bandwidth: object = "auto"
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 50
    seed: int = 42
    label_fraction: float = 0.0
    encoder_hidden: tuple = (128, 64)
    hidden_activation: str = "tanh"
    decoder_output_activation: str = "sigmoid"
    bandwidth_trials: int = 3

    def validate(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.kde_support_size < 1:
            raise ValueError("kde_support_size must be >= 1")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.lag_interval < 1:
            raise ValueError("lag_interval must be >= 1")
        if self.jsd_weight < 0.0:
            raise ValueError("jsd_weight must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.label_fraction <= 1.0:
            raise ValueError("label_fraction must lie in [0, 1]")
        if self.bandwidth != "auto":
            h = float(self.bandwidth)
            if not np.isfinite(h) or h <= 0.0:
                raise ValueError("bandwidth must be 'auto' or a positive real")
        if self.target.dim != self.latent_dim:
            raise ValueError(
                f"target dimension {self.target.dim} != latent_dim {self.latent_dim}")


@dataclass
class EpochStats:
    reconstruction_loss: float
    jsd_term: float
    latent_mean: np.ndarray
    latent_variance: np.ndarray
    wall_clock: float


@dataclass
class TrainReport:
    """Per-epoch training series plus the resolved bandwidth."""

    bandwidth: float
    epochs: list = field(default_factory=list)
    checkpoint_path: str = ""

    @property
    def reconstruction_losses(self):
        return [e.reconstruction_loss for e in self.epochs]

    @property
    def jsd_terms(self):
        return [e.jsd_term for e in self.epochs]

    def to_csv(self, path):
        dim = len(self.epochs[0].latent_mean) if self.epochs else 0
        cols = (["epoch", "reconstruction_loss", "jsd_term"]
                + [f"latent_mean_{i}" for i in range(dim)]
                + [f"latent_var_{i}" for i in range(dim)]
                + ["wall_clock"])
        lines = [",".join(cols)]
        for idx, e in enumerate(self.epochs):
            cells = ([str(idx), f"{e.reconstruction_loss:.10g}", f"{e.jsd_term:.10g}"]
                     + [f"{v:.10g}" for v in e.latent_mean]
                     + [f"{v:.10g}" for v in e.latent_variance]
                     + [f"{e.wall_clock:.6g}"])
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def summary(self):
        if not self.epochs:
            return "no epochs recorded"
        first, last = self.epochs[0], self.epochs[-1]
        return (f"h={self.bandwidth:.4f} epochs={len(self.epochs)} "
                f"recon {first.reconstruction_loss:.5g} -> {last.reconstruction_loss:.5g} "
                f"jsd_term {first.jsd_term:.5g} -> {last.jsd_term:.5g}")


def _build_networks(cfg, data_dim, rng):
    hidden = list(cfg.encoder_hidden)
    enc_dims = [data_dim] + hidden + [cfg.latent_dim]
    enc_acts = [cfg.hidden_activation] * len(hidden) + ["identity"]
    dec_dims = [cfg.latent_dim] + hidden[::-1] + [data_dim]
    dec_acts = [cfg.hidden_activation] * len(hidden) + [cfg.decoder_output_activation]
    encoder = Mlp.create(enc_dims, enc_acts, rng)
    decoder = Mlp.create(dec_dims, dec_acts, rng)
    return Autoencoder(encoder, decoder)


def penalty_groups(batch_labels, target, class_components):
    """Split a minibatch into (row_indices, per-group target) for the penalty.

    Unlabeled rows (label -1) use the full mixture; labeled rows use their
    class component only.
    """
    batch_labels = np.asarray(batch_labels)
    groups = []
    unlabeled = np.flatnonzero(batch_labels < 0)
    if unlabeled.size:
        groups.append((unlabeled, target))
    for cls in np.unique(batch_labels[batch_labels >= 0]):
        rows = np.flatnonzero(batch_labels == cls)
        groups.append((rows, class_components[int(cls)]))
    return groups


def _class_components(target):
    comps = []
    for k in range(target.n_components):
        comps.append(TargetDistribution.mixture_of_gaussians(
            [(1.0, target.means[k], target.stddevs[k])]))
    return comps


def _check_finite_params(model):
    for p in model.encoder.parameters() + model.decoder.parameters():
        if not np.all(np.isfinite(p)):
            raise NumericsError("non-finite network parameters after update")


def train_gen(data, cfg, labels=None, rng=None):
    """Train an autoencoder whose latent distribution matches cfg.target.

    Per minibatch: encode, update the encoder with the reconstruction
    gradient plus jsd_weight times the encoded-side JSD gradient chained
    through the encoder, update the decoder with the reconstruction gradient
    (both from one forward pass), and re-encode the KDE support subset
    whenever the 0-based minibatch counter is a multiple of lag_interval.
    With jsd_weight 0 the KDE machinery is skipped entirely and this is a
    plain autoencoder. Deterministic given cfg.seed.

    Returns (Autoencoder, TrainReport).
    """
    cfg.validate()
    if not isinstance(data, SampleSet):
        data = SampleSet(data)
    n = len(data)
    if cfg.kde_support_size > n:
        raise ValueError("kde_support_size exceeds the training-set size")
    semi = cfg.label_fraction > 0.0
    if semi:
        if labels is None:
            raise ValueError("label_fraction > 0 requires labels")
        if cfg.target.kind != "mixture":
            raise ValueError("semi-supervised training requires a mixture target")
        labels = np.asarray(labels, dtype=np.int64).ravel()
        if labels.shape != (n,):
            raise ValueError("labels must have one entry per training sample")
        if labels.min() < 0 or labels.max() >= cfg.target.n_components:
            raise ValueError("labels must index the mixture components")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    use_penalty = cfg.jsd_weight > 0.0
    h = None
    if use_penalty:
        if cfg.bandwidth == "auto":
            solved = optimal_bandwidth_root_trap(
                cfg.latent_dim, cfg.kde_support_size, cfg.target,
                n_trials=cfg.bandwidth_trials, rng=rng)
            h = solved.h_mean
        else:
            h = float(cfg.bandwidth)

    effective_labels = None
    if semi:
        effective_labels = np.full(n, -1, dtype=np.int64)
        keep = rng.choice(n, size=int(round(cfg.label_fraction * n)), replace=False)
        effective_labels[keep] = labels[keep]

    model = _build_networks(cfg, data.dim, rng)
    enc_params = model.encoder.parameters()
    dec_params = model.decoder.parameters()
    enc_state = AdamState(enc_params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    dec_state = AdamState(dec_params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    support_rows = None
    support_codes = None
    class_components = _class_components(cfg.target) if semi else None
    if use_penalty:
        support_rows = data.points[rng.permutation(n)[:cfg.kde_support_size]]
        support_codes = model.encoder.forward(support_rows)[0]

    report = TrainReport(bandwidth=h if h is not None else float("nan"))
    minibatch_index = 0
    for _ in range(cfg.epochs):
        tic = time.perf_counter()
        order = rng.permutation(n)
        recon_terms = []
        jsd_terms = []
        for start in range(0, n, cfg.minibatch_size):
            rows = order[start:start + cfg.minibatch_size]
            xb = data.points[rows]
            nb = len(rows)
            z, enc_cache = model.encoder.forward(xb)
            xhat, dec_cache = model.decoder.forward(z)
            resid = xhat - xb
            recon_loss = float(np.einsum("ij,ij->", resid, resid)) / nb
            if not np.isfinite(recon_loss):
                raise NumericsError(
                    f"non-finite reconstruction loss at minibatch {minibatch_index}")
            dec_grads, d_z = model.decoder.backward(dec_cache, 2.0 * resid / nb)

            jsd_term = 0.0
            if use_penalty:
                kde = GaussianKde(SampleSet(support_codes), h)
                jsd_rows = np.zeros_like(z)
                if semi:
                    groups = penalty_groups(effective_labels[rows], cfg.target,
                                            class_components)
                else:
                    groups = [(np.arange(nb), cfg.target)]
                for idx, group_target in groups:
                    batch = SampleSet(z[idx])
                    rows_g = jsd_grad_queries(kde, group_target, batch)
                    jsd_rows[idx] = rows_g * (len(idx) / nb)
                    log_s = kde.log_density_batch(z[idx])
                    log_t = group_target.log_density_batch(z[idx])
                    ratio = log_s - np.logaddexp(log_t, log_s)
                    jsd_term += float(ratio.sum()) / nb
                penalty = cfg.jsd_weight * jsd_rows
                norm = float(np.linalg.norm(penalty))
                if norm > GRAD_CLIP_NORM:
                    penalty *= GRAD_CLIP_NORM / norm
                d_z = d_z + penalty
            enc_grads, _ = model.encoder.backward(enc_cache, d_z)

            adam_step(enc_params, enc_grads, enc_state)
            adam_step(dec_params, dec_grads, dec_state)
            _check_finite_params(model)

            if use_penalty and minibatch_index % cfg.lag_interval == 0:
                support_codes = model.encoder.forward(support_rows)[0]
            minibatch_index += 1
            recon_terms.append(recon_loss)
            jsd_terms.append(jsd_term)

        codes = model.encode(data.points)
        report.epochs.append(EpochStats(
            reconstruction_loss=float(np.mean(recon_terms)),
            jsd_term=float(np.mean(jsd_terms)),
            latent_mean=codes.mean(axis=0),
            latent_variance=codes.var(axis=0, ddof=1),
            wall_clock=time.perf_counter() - tic,
        ))
    return model, report


def assign_modes(encoder, target, queries):
    """Mixture component with the highest posterior responsibility per query.

    Ties break deterministically to the lower component index.
    """
    if target.kind != "mixture":
        raise ValueError("assign_modes requires a mixture target")
    if not isinstance(queries, SampleSet):
        queries = SampleSet(queries)
    codes, _ = encoder.forward(queries.points)
    comp = target.component_log_densities(codes)
    return np.argmax(comp, axis=1)


# --- flat key=value config files -------------------------------------------

_CONFIG_FIELDS = {
    "latent_dim": int,
    "kde_support_size": int,
    "minibatch_size": int,
    "lag_interval": int,
    "jsd_weight": float,
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "epochs": int,
    "seed": int,
    "label_fraction": float,
    "hidden_activation": str,
    "decoder_output_activation": str,
    "bandwidth_trials": int,
}


def parse_config_text(text):
    """Parse a flat ``key = value`` config ('#' comments) into kwargs for
    TrainConfig plus a dict of unrecognized keys (paths etc.).

    Recognized extras: bandwidth (auto or float), encoder_hidden
    (comma-separated widths), target (standard-normal | mixture), and
    target_components (semicolon-separated ``weight,stddev,mu1,mu2,...``).
    """
    entries = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line is not key = value: {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()

    kwargs = {}
    extras = {}
    for key, value in entries.items():
        if key in _CONFIG_FIELDS:
            kwargs[key] = _CONFIG_FIELDS[key](value)
        elif key == "bandwidth":
            kwargs[key] = "auto" if value == "auto" else float(value)
        elif key == "encoder_hidden":
            kwargs[key] = tuple(int(v) for v in value.split(",") if v.strip())
        elif key == "target":
            extras["target"] = value
        elif key == "target_components":
            extras["target_components"] = value
        else:
            extras[key] = value

    if "latent_dim" not in kwargs:
        raise ValueError("config must set latent_dim")
    target_kind = extras.pop("target", "standard-normal")
    if target_kind == "standard-normal":
        kwargs["target"] = TargetDistribution.standard_normal(kwargs["latent_dim"])
    elif target_kind == "mixture":
        spec = extras.pop("target_components", "")
        comps = []
        for chunk in spec.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = [float(v) for v in chunk.split(",")]
            if len(parts) < 3:
                raise ValueError("target_components entries need weight,stddev,mu1,...")
            comps.append((parts[0], np.array(parts[2:]), parts[1]))
        if not comps:
            raise ValueError("target = mixture requires target_components")
        kwargs["target"] = TargetDistribution.mixture_of_gaussians(comps)
    else:
        raise ValueError(f"unknown target {target_kind!r}")
    return kwargs, extras


def load_train_config(path):
    """Read a config file; returns (TrainConfig, extra-keys dict)."""
    with open(path, "r", encoding="utf-8") as fh:
        kwargs, extras = parse_config_text(fh.read())
    return TrainConfig(**kwargs), extras


def config_hash(cfg):
    """Stable short hash of the configuration, for checkpoint metadata."""
    target = cfg.target
    parts = [f"{name}={getattr(cfg, name)}" for name in sorted(_CONFIG_FIELDS)]
    parts.append(f"bandwidth={cfg.bandwidth}")
    parts.append(f"encoder_hidden={tuple(cfg.encoder_hidden)}")
    parts.append(f"target={target.kind}:{target.weights.tolist()}:"
                 f"{target.means.tolist()}:{target.stddevs.tolist()}")
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]
