"""Command-line entry point.

Subcommands: bandwidth (optimal-bandwidth tables), train (autoencoder with
the latent JSD penalty), generate (decode target draws from a checkpoint),
entropy (leave-one-out KDE entropy of a sample file), correlate (the
separation study), and novelty (ranked outlier scores).

Exit codes: 0 success, 1 numeric failure, 2 usage or validation error.
"""

import argparse
import os
import sys

import numpy as np

from . import analysis, bandwidth, novelty, trainer
from .density import SampleSet, TargetDistribution
from .exceptions import NumericsError
from .nn import load_checkpoint, save_checkpoint


def _write_atomic(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_samples(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"GKDE":
        return SampleSet.from_binary(path)
    return SampleSet.from_csv(path)


def _parse_int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _parse_float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _load_target(spec, dim):
    """standard-normal, or mog:<csv> with weight,stddev,mu1,... per line."""
    if spec == "standard-normal":
        return TargetDistribution.standard_normal(dim)
    if spec.startswith("mog:"):
        comps = []
        with open(spec[4:], "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = [float(v) for v in line.split(",")]
                if len(parts) < 3:
                    raise ValueError("mixture lines need weight,stddev,mu1,...")
                comps.append((parts[0], np.array(parts[2:]), parts[1]))
        target = TargetDistribution.mixture_of_gaussians(comps)
        if dim is not None and target.dim != dim:
            raise ValueError(f"mixture dimension {target.dim} does not match {dim}")
        return target
    raise ValueError(f"unknown target spec {spec!r}")


def _target_metadata(target):
    if target.kind == "standard-normal":
        return {"target": "standard-normal"}
    comps = ";".join(
        f"{w:.17g},{s:.17g}," + ",".join(f"{v:.17g}" for v in mu)
        for w, mu, s in zip(target.weights, target.means, target.stddevs))
    return {"target": "mixture", "target_components": comps}


def _target_from_metadata(meta, dim):
    kind = meta.get("target", "standard-normal")
    if kind == "standard-normal":
        return TargetDistribution.standard_normal(dim)
    comps = []
    for chunk in meta["target_components"].split(";"):
        parts = [float(v) for v in chunk.split(",")]
        comps.append((parts[0], np.array(parts[2:]), parts[1]))
    return TargetDistribution.mixture_of_gaussians(comps)


def cmd_bandwidth(args):
    dims = _parse_int_list(args.dims)
    sizes = _parse_int_list(args.samples)
    if not dims or not sizes:
        raise ValueError("--dims and --samples must be nonempty")
    if args.target != "standard-normal":
        # mixture targets share one dimension; the grid must match it
        target = _load_target(args.target, dims[0] if len(dims) == 1 else None)
        cells = []
        for m in sizes:
            rng = np.random.default_rng([args.seed, target.dim, m])
            summary = bandwidth.optimal_bandwidth_root_trap(
                target.dim, m, target, args.trials, rng)
            cells.append(bandwidth.TableCell(dim=target.dim, m=m, summary=summary))
    else:
        cells = bandwidth.bandwidth_table(dims, sizes, n_trials=args.trials,
                                          seed=args.seed, method=args.method)
    csv = bandwidth.table_to_csv(cells)
    if args.out:
        _write_atomic(args.out, csv)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_train(args):
    cfg, extras = trainer.load_train_config(args.config)
    data_path = extras.get("data")
    if not data_path:
        raise ValueError("config must set data = <samples file>")
    data = _load_samples(data_path)
    labels = None
    if "labels" in extras:
        labels = np.loadtxt(extras["labels"], dtype=np.int64, ndmin=1)
    model, report = trainer.train_gen(data, cfg, labels=labels)

    checkpoint_path = extras.get("checkpoint", "model.gkde")
    metadata = {"config_hash": trainer.config_hash(cfg),
                "bandwidth": f"{report.bandwidth:.17g}",
                "seed": cfg.seed}
    metadata.update(_target_metadata(cfg.target))
    save_checkpoint(checkpoint_path, model, metadata)
    report.checkpoint_path = checkpoint_path
    report_path = extras.get("report", "")
    if report_path:
        report.to_csv(report_path)
    print(report.summary())
    print(f"checkpoint: {checkpoint_path}")
    return 0


def cmd_generate(args):
    model, meta = load_checkpoint(args.checkpoint)
    if args.count < 0:
        raise ValueError("count must be >= 0")
    if args.count == 0:
        _write_atomic(args.out, "")
        return 0
    target = _target_from_metadata(meta, model.latent_dim)
    rng = np.random.default_rng(args.seed)
    decoded = model.decode(target.sample(args.count, rng).points)
    samples = SampleSet(decoded)
    if args.format == "binary":
        samples.to_binary(args.out)
    else:
        tmp = f"{args.out}.tmp"
        samples.to_csv(tmp)
        os.replace(tmp, args.out)
    return 0


def cmd_entropy(args):
    samples = _load_samples(args.samples)
    if args.whiten:
        from .density import whiten
        samples = whiten(samples)
    if args.bandwidth == "auto":
        result = bandwidth.entropy_bandwidth_fixed_point(samples)
        if not result.converged:
            raise NumericsError("entropy bandwidth fixed point did not converge")
        h = result.h_opt
    else:
        h = float(args.bandwidth)
    value = analysis.kde_entropy(samples, h)
    print(f"entropy_nats = {value:.6f}")
    print(f"bandwidth = {h:.6f}")
    print(f"samples = {len(samples)}  dim = {samples.dim}")
    return 0


def cmd_correlate(args):
    cfg = analysis.CorrelationStudyConfig(
        dims=tuple(_parse_int_list(args.dims)),
        sample_sizes=tuple(_parse_int_list(args.samples)),
        separations=tuple(_parse_float_list(args.separations)),
        trials=args.trials,
        seed=args.seed,
    )
    cells = analysis.run_correlation_study(cfg)
    _write_atomic(f"{args.out_prefix}_records.csv", analysis.study_records_csv(cells))
    _write_atomic(f"{args.out_prefix}_summary.csv", analysis.study_summary_csv(cells))
    for cell in cells:
        print(f"l={cell.dim} m={cell.m}: r={cell.pearson_r:.4f} p={cell.p_value:.3g}")
    return 0


def cmd_novelty(args):
    model, meta = load_checkpoint(args.checkpoint)
    target = _target_from_metadata(meta, model.latent_dim)
    data = _load_samples(args.data)
    if args.sigma == "auto":
        sigma = novelty.calibrate_sigma(model, data)
    else:
        sigma = float(args.sigma)
    scores = novelty.novelty_scores(model, target, data, sigma)
    _write_atomic(args.out, novelty.scores_csv(scores))
    values = np.array([s.score for s in scores])
    order = np.argsort(values, kind="stable")
    k = min(args.top, len(order))
    print(f"sigma = {sigma:.6g}")
    print("lowest-score indices: " + ",".join(str(i) for i in order[:k]))
    print("highest-score indices: " + ",".join(str(i) for i in order[-k:][::-1]))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="genkde",
        description="KDE-based JSD tools: bandwidth tables, latent-matching "
                    "autoencoder training, entropy, correlation study, "
                    "generation, and novelty scoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bandwidth", help="optimal-bandwidth table")
    p.add_argument("--dims", required=True, help="comma-separated latent dimensions")
    p.add_argument("--samples", required=True, help="comma-separated KDE sample counts")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--method", choices=["root-trap", "fixed-point"], default="root-trap")
    p.add_argument("--target", default="standard-normal",
                   help="standard-normal or mog:<csv>")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="", help="output CSV (stdout when omitted)")
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("train", help="train from a key=value config file")
    p.add_argument("config", help="flat key = value config file"
                   " (must set data = <samples file>)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode target draws from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--count", "-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("entropy", help="leave-one-out KDE entropy of a sample file")
    p.add_argument("samples")
    p.add_argument("--bandwidth", default="auto", help="auto or a positive value")
    p.add_argument("--whiten", action="store_true", help="whiten the samples first")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("correlate", help="separation-vs-divergence study")
    p.add_argument("--dims", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--separations", default="0,1,2,3,4,5,6")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-prefix", default="study")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("novelty", help="ranked outlier scores for a data file")
    p.add_argument("checkpoint")
    p.add_argument("data")
    p.add_argument("--sigma", default="auto", help="auto or a positive value")
    p.add_argument("--top", "-k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_novelty)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
