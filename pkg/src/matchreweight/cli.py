"""Command-line entry point.

Subcommands: gen-data, train, sweep-imbalance, sweep-shift,
estimate-proportions, gmm-ot-baseline.  All outputs are CSV; a non-finite
training loss terminates with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments, nn, proportions, toydata, training
from .errors import NonFiniteLoss


def _add_common(parser):
    parser.add_argument("--config", help="experiment config file ([experiment] INI section)")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--seed", type=int, default=None, help="base seed")
    parser.add_argument("--reps", type=int, default=None, help="repetitions per cell")
    parser.add_argument("--profile", choices=("full", "ci"), default="ci",
                        help="default repetition count: full=20, ci=3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matchreweight")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a toy source/target pair as CSV")
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--out", required=True, help="output stem; writes <out>_source.csv and <out>_target.csv")
    p.add_argument("--seed", type=int, default=None)

    for kind in ("train", "sweep-imbalance", "sweep-shift", "gmm-ot-baseline"):
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        _add_common(p)
        if kind == "train":
            p.add_argument("--train-log", help="write the first repetition's per-epoch log here")
            p.add_argument("--save-model", help="checkpoint stem for the first repetition's networks")

    p = sub.add_parser("estimate-proportions",
                       help="estimate target label proportions from latents CSVs")
    p.add_argument("--source", required=True, help="CSV of source latents with a trailing label column")
    p.add_argument("--target", required=True, help="CSV of target latents")
    p.add_argument("--method", choices=("gmm", "agglomerative", "both"), default="both")
    p.add_argument("--classes", type=int, default=None, help="number of classes (default: from labels)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--floor", type=float, default=1e-3, help="importance-weight floor")

    p = sub.add_parser("solve-ot", help="debug: solve a transport problem from a dense cost CSV")
    p.add_argument("--cost", required=True, help="dense row-major cost matrix CSV (no header)")
    p.add_argument("--row-marginal", help="CSV with one weight per line (default: uniform)")
    p.add_argument("--col-marginal", help="CSV with one weight per line (default: uniform)")

    p = sub.add_parser("fit-mixture", help="debug: fit a target mixture and dump it as text")
    p.add_argument("--input", required=True, help="CSV of points (header row, no label column)")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--method", choices=("gmm", "agglomerative"), default="gmm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the dump here instead of stdout")
    return parser


def _load_cfg(args) -> dict:
    return experiments.load_config_file(args.config) if getattr(args, "config", None) else {}


def _write_dataset(path, dataset):
    with open(path, "w") as fh:
        dim = dataset.points.shape[1]
        fh.write(",".join(f"x{i}" for i in range(dim)) + ",label\n")
        for row, label in zip(dataset.points, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{label}\n")


def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    spec = experiments.spec_from_config(experiments.KIND_SINGLE, cfg, out="unused",
                                        seed=args.seed)
    toy = spec.toy
    if args.seed is not None:
        from dataclasses import replace
        toy = replace(toy, seed=args.seed)
    source, target = toydata.gen_toy(toy)
    _write_dataset(f"{args.out}_source.csv", source)
    _write_dataset(f"{args.out}_target.csv", target)
    print(f"wrote {args.out}_source.csv and {args.out}_target.csv")
    return 0


def _run_kind(kind: str, args) -> int:
    cfg = _load_cfg(args)
    spec = experiments.spec_from_config(kind, cfg, out=args.out, seed=args.seed,
                                        reps=args.reps, profile=args.profile)
    if kind == experiments.KIND_GMM_OT and "methods" not in cfg:
        spec.methods = [experiments.METHOD_GMM_OT, training.METHOD_SOURCE_ONLY]
    rows = experiments.run_experiment(spec)
    print(f"wrote {len(rows)} rows to {spec.out} "
          f"(aggregate: {experiments.aggregate_path(spec.out)})")
    if kind == experiments.KIND_SINGLE and (args.train_log or args.save_model):
        _rerun_first_rep(spec, args)
    return 0


def _rerun_first_rep(spec, args):
    from dataclasses import replace
    toy = replace(spec.toy, seed=spec.base_seed)
    source, target = toydata.gen_toy(toy)
    train_cfg = replace(spec.train, method=spec.methods[0], seed=spec.base_seed)
    trained = experiments._dispatch_train(train_cfg, source, target)
    if args.train_log:
        training.write_training_log(trained, args.train_log)
        print(f"wrote training log to {args.train_log}")
    if args.save_model:
        nn.save_mlp(trained.features, f"{args.save_model}_features.txt")
        nn.save_mlp(trained.classifier, f"{args.save_model}_classifier.txt")
        print(f"wrote checkpoints to {args.save_model}_features.txt / _classifier.txt")


def _read_latents_csv(path, with_labels):
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    if with_labels:
        return data[:, :-1], data[:, -1].astype(int)
    return data, None


def cmd_estimate_proportions(args) -> int:
    src_x, src_y = _read_latents_csv(args.source, with_labels=True)
    tgt_x, _ = _read_latents_csv(args.target, with_labels=False)
    n_classes = args.classes if args.classes is not None else int(src_y.max()) + 1
    p_src = np.bincount(src_y, minlength=n_classes) / src_y.size
    methods = ("gmm", "agglomerative") if args.method == "both" else (args.method,)
    print("method,quantity," + ",".join(f"class_{k}" for k in range(n_classes)))
    for method in methods:
        est = proportions.estimate_target_proportions(
            src_x, src_y, tgt_x, n_classes, method=method, seed=args.seed)
        weights = proportions.importance_weights(p_src, est.p_target, floor=args.floor)
        print(f"{method},p_target," + ",".join(f"{v:.12g}" for v in est.p_target))
        print(f"{method},permutation," + ",".join(str(v) for v in est.permutation))
        print(f"{method},weights," + ",".join(f"{v:.12g}" for v in weights.w))
    return 0


def cmd_solve_ot(args) -> int:
    from . import ot

    cost = np.atleast_2d(np.genfromtxt(args.cost, delimiter=","))
    n, m = cost.shape
    a = np.genfromtxt(args.row_marginal, delimiter=",") if args.row_marginal else np.full(n, 1 / n)
    b = np.genfromtxt(args.col_marginal, delimiter=",") if args.col_marginal else np.full(m, 1 / m)
    plan = ot.solve_discrete_ot(cost, a, b)
    print(f"objective,{plan.objective!r}")
    for row in plan.coupling:
        print(",".join(repr(float(v)) for v in row))
    return 0


def cmd_fit_mixture(args) -> int:
    from . import mixtures

    points, _ = _read_latents_csv(args.input, with_labels=False)
    if args.method == "gmm":
        model = mixtures.gmm_fit(points, args.classes, seed=args.seed)
    else:
        d = points.shape[1]
        labels = mixtures.agglomerative_cluster(points, args.classes)
        covs = []
        for k in range(args.classes):
            members = points[labels == k]
            covs.append(np.cov(members.T, bias=True).reshape(d, d)
                        if members.shape[0] > 1 else np.zeros((d, d)))
        model = mixtures.MixtureModel(
            means=mixtures.cluster_means(points, labels, args.classes),
            covariances=np.stack(covs),
            proportions=mixtures.cluster_proportions(labels, args.classes),
        )
    lines = ["mixture-model v1", f"components {model.n_components} dim {model.dim}"]
    for k in range(model.n_components):
        lines.append(f"component {k} proportion {float(model.proportions[k])!r}")
        lines.append("mean " + " ".join(repr(float(v)) for v in model.means[k]))
        for row in model.covariances[k]:
            lines.append("cov " + " ".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {
        "gen-data": cmd_gen_data,
        "estimate-proportions": cmd_estimate_proportions,
        "solve-ot": cmd_solve_ot,
        "fit-mixture": cmd_fit_mixture,
        "train": lambda a: _run_kind(experiments.KIND_SINGLE, a),
        "sweep-imbalance": lambda a: _run_kind(experiments.KIND_SWEEP_IMBALANCE, a),
        "sweep-shift": lambda a: _run_kind(experiments.KIND_SWEEP_SHIFT, a),
        "gmm-ot-baseline": lambda a: _run_kind(experiments.KIND_GMM_OT, a),
    }
    try:
        return commands[args.command](args)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
