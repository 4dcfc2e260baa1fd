"""Configuration-driven experiment runner emitting versioned CSV results.

An experiment is a grid of toy configurations crossed with methods and
repetitions.  Every repetition r uses seed ``base_seed + r`` for both data
generation and training, so a rerun with the same base seed reproduces the
output byte-for-byte (the generated-at comment line aside).  Raw rows are
flushed as they are produced; aggregates (mean/std per cell) go to a second
file next to the raw one.
"""

from __future__ import annotations

import configparser
import datetime
from dataclasses import dataclass, field, replace

import numpy as np

from . import mixtures, ot, proportions, toydata, training

RESULTS_SCHEMA = "# matchreweight-results v1"
AGGREGATE_SCHEMA = "# matchreweight-aggregate v1"

KIND_SINGLE = "single-run"
KIND_SWEEP_IMBALANCE = "sweep-imbalance"
KIND_SWEEP_SHIFT = "sweep-shift"
KIND_ESTIMATE = "estimate-proportions"
KIND_GMM_OT = "gmm-ot-baseline"
KINDS = (KIND_SINGLE, KIND_SWEEP_IMBALANCE, KIND_SWEEP_SHIFT, KIND_ESTIMATE, KIND_GMM_OT)

METHOD_GMM_OT = "GMMOT"

PROFILE_REPS = {"full": 20, "ci": 3}


@dataclass
class ExperimentSpec:
    kind: str
    out: str
    methods: list = field(default_factory=lambda: [training.METHOD_MARSC, training.METHOD_SOURCE_ONLY])
    reps: int = 3
    base_seed: int = 0
    regime: str = "low"
    majority_grid: tuple = toydata.DEFAULT_MAJORITY_GRID
    shift_grid: tuple = toydata.DEFAULT_SHIFT_GRID
    preset: int = 0
    toy: toydata.ToyConfig = field(default_factory=toydata.ToyConfig)
    train: training.TrainConfig = field(default_factory=training.TrainConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


@dataclass(frozen=True)
class ResultRow:
    config_id: str
    axis: float
    method: str
    seed: int
    balanced_accuracy: float | None
    l1_error: float | None


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run the grid and write raw + aggregate CSVs; returns the raw rows."""
    configs = _grid(spec)
    rows = []
    raw_path = spec.out
    with open(raw_path, "w") as fh:
        fh.write(RESULTS_SCHEMA + "\n")
        fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write("config_id,axis,method,seed,balanced_accuracy,l1_error\n")
        for config_id, axis, toy_cfg in configs:
            for method in spec.methods:
                for rep in range(spec.reps):
                    seed = spec.base_seed + rep
                    row = _run_one(spec, config_id, axis, toy_cfg, method, seed)
                    rows.append(row)
                    fh.write(_format_row(row) + "\n")
                    fh.flush()
    write_aggregate(rows, aggregate_path(raw_path))
    return rows


def aggregate_path(raw_path: str) -> str:
    stem, dot, ext = str(raw_path).rpartition(".")
    return f"{stem}_agg.{ext}" if dot else f"{raw_path}_agg"


def _grid(spec: ExperimentSpec):
    if spec.kind == KIND_SWEEP_IMBALANCE:
        cfgs = toydata.imbalance_sweep_configs(
            spec.regime, spec.majority_grid,
            n_source=spec.toy.n_source, n_target=spec.toy.n_target)
        return [(f"majority={m:g}", float(m), c) for m, c in zip(spec.majority_grid, cfgs)]
    if spec.kind == KIND_SWEEP_SHIFT:
        cfgs = toydata.shift_sweep_configs(
            spec.preset, spec.shift_grid, spec.regime,
            n_source=spec.toy.n_source, n_target=spec.toy.n_target)
        return [(f"shift={r:g}", float(r), c) for r, c in zip(spec.shift_grid, cfgs)]
    # single-run, estimate-proportions and gmm-ot-baseline use the experiment's
    # toy config as the lone grid point.
    return [(spec.kind, 0.0, spec.toy)]


def _run_one(spec, config_id, axis, toy_cfg, method, seed) -> ResultRow:
    toy_cfg = replace(toy_cfg, seed=seed)
    source, target = toydata.gen_toy(toy_cfg)
    truth = np.bincount(target.labels, minlength=toy_cfg.n_classes) / target.labels.size

    if spec.kind == KIND_ESTIMATE:
        if method not in (training.METHOD_MARSG, training.METHOD_MARSC):
            raise ValueError(f"estimate-proportions supports MARSg/MARSc, got {method!r}")
        estimator = proportions.METHOD_GMM if method == training.METHOD_MARSG else proportions.METHOD_AGGLOMERATIVE
        est = proportions.estimate_target_proportions(
            source.points, source.labels, target.points, toy_cfg.n_classes,
            method=estimator, seed=seed)
        return ResultRow(config_id, axis, method, seed, None,
                         toydata.l1_proportion_error(est.p_target, truth))

    if method == METHOD_GMM_OT:
        pred, est = gmm_ot_classify(source.points, source.labels, target.points,
                                    toy_cfg.n_classes, seed)
        bacc = training._balanced_accuracy(pred, target.labels, toy_cfg.n_classes)
        return ResultRow(config_id, axis, method, seed, bacc,
                         toydata.l1_proportion_error(est.p_target, truth))

    if method.startswith(training.METHOD_WD_BETA) and len(method) > len(training.METHOD_WD_BETA):
        # "WDBeta<value>" method labels carry their own relaxation.
        train_cfg = replace(spec.train, method=training.METHOD_WD_BETA,
                            beta=float(method[len(training.METHOD_WD_BETA):]), seed=seed)
    else:
        train_cfg = replace(spec.train, method=method, seed=seed)
    trained = _dispatch_train(train_cfg, source, target)
    bacc = training.evaluate(trained, target).balanced_accuracy
    l1 = trained.log[-1]["l1_error"] if trained.log and trained.log[-1]["l1_error"] is not None else None
    return ResultRow(config_id, axis, method, seed, bacc, l1)


def _dispatch_train(cfg: training.TrainConfig, source, target):
    if cfg.method in (training.METHOD_MARSG, training.METHOD_MARSC):
        return training.train_mars(cfg, source, target)
    if cfg.method == training.METHOD_WD_BETA:
        return training.train_wd_beta(cfg, source, target)
    return training.train_source_only(cfg, source, target)


def gmm_ot_classify(source_latents, source_labels, target_latents, n_classes: int, seed: int):
    """Label target points by a target-fitted GMM whose modes are matched to
    source classes with optimal assignment.

    Returns (predicted labels, ProportionEstimate).  No neural training.
    """
    model = mixtures.gmm_fit(np.asarray(target_latents, dtype=float), n_classes, seed=seed)
    src_means, _ = proportions.source_class_means(source_latents, source_labels, n_classes)
    cost = np.sum((src_means[:, None, :] - model.means[None, :, :]) ** 2, axis=2)
    perm = ot.optimal_assignment(cost)  # source class -> mode index
    est = proportions.ProportionEstimate(
        p_target=model.proportions[perm].copy(),
        permutation=perm,
        method=proportions.METHOD_GMM,
        mode_proportions=model.proportions,
    )
    mode_of_point = np.argmax(mixtures.gmm_responsibilities(model, target_latents), axis=1)
    class_of_mode = np.empty(n_classes, dtype=int)
    class_of_mode[perm] = np.arange(n_classes)
    return class_of_mode[mode_of_point], est


def _fmt(value) -> str:
    # repr of a Python float is the shortest exact round-trip form.
    if value is None:
        return ""
    return repr(float(value))


def _format_row(row: ResultRow) -> str:
    return ",".join([
        row.config_id, _fmt(row.axis), row.method, str(row.seed),
        _fmt(row.balanced_accuracy), _fmt(row.l1_error),
    ])


def write_aggregate(rows: list, path) -> None:
    """Mean/std per (axis, method, metric) cell, in first-seen order."""
    cells: dict = {}
    for row in rows:
        for metric, value in (("balanced_accuracy", row.balanced_accuracy), ("l1_error", row.l1_error)):
            if value is None:
                continue
            cells.setdefault((row.axis, row.method, metric), []).append(value)
    with open(path, "w") as fh:
        fh.write(AGGREGATE_SCHEMA + "\n")
        fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write("axis,method,metric,mean,std,n\n")
        for (axis, method, metric), values in cells.items():
            arr = np.asarray(values)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            fh.write(",".join([
                _fmt(axis), method, metric, _fmt(float(arr.mean())), _fmt(std), str(arr.size),
            ]) + "\n")


def read_results(path) -> list:
    """Parse a raw results CSV back into ResultRow objects (testing aid)."""
    rows = []
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh]
    if not lines or lines[0] != RESULTS_SCHEMA:
        raise ValueError(f"not a results file: {path}")
    for line in lines[1:]:
        if line.startswith("#") or line.startswith("config_id") or not line:
            continue
        config_id, axis, method, seed, bacc, l1 = line.split(",")
        rows.append(ResultRow(config_id, float(axis), method, int(seed),
                              float(bacc) if bacc else None, float(l1) if l1 else None))
    return rows


def load_config_file(path) -> dict:
    """Documented key-value experiment config: one [experiment] INI section."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "experiment" not in parser:
        raise ValueError(f"config file {path} needs an [experiment] section")
    return dict(parser["experiment"])


def spec_from_config(kind: str, cfg: dict, out: str, seed: int | None = None,
                     reps: int | None = None, profile: str = "ci") -> ExperimentSpec:
    """Build an ExperimentSpec from config-file values plus CLI overrides."""
    def floats(key, default):
        if key not in cfg:
            return default
        return tuple(float(tok) for tok in cfg[key].replace(" ", "").split(","))

    toy = toydata.ToyConfig(
        covariance_scale=float(cfg.get("covariance_scale",
                                       toydata.REGIME_SCALES[cfg.get("regime", "low")])),
        shift=np.asarray(floats("shift", tuple(toydata.DEFAULT_SHIFT))),
        p_source=np.asarray(floats("p_source", (1 / 3, 1 / 3, 1 / 3))),
        p_target=np.asarray(floats("p_target", (1 / 3, 1 / 3, 1 / 3))),
        n_source=int(cfg.get("n_source", 600)),
        n_target=int(cfg.get("n_target", 600)),
    )
    train_kwargs = {}
    for key, cast in [("epochs", int), ("batch_size", int), ("critic_iters", int),
                      ("refresh_period", int), ("gmm_max_iter", int), ("hidden_units", int),
                      ("lam", float), ("beta", float), ("lr_critic", float),
                      ("lr_classifier", float), ("lr_features", float),
                      ("weight_decay", float), ("gp_coeff", float), ("weight_floor", float),
                      ("clip_grad_norm", float)]:
        if key in cfg:
            train_kwargs[key] = cast(cfg[key])
    if "optimizer" in cfg:
        train_kwargs["optimizer"] = cfg["optimizer"]
    methods = [m.strip() for m in cfg.get("methods", "MARSc,SourceOnly").split(",") if m.strip()]
    return ExperimentSpec(
        kind=kind,
        out=out,
        methods=methods,
        reps=reps if reps is not None else int(cfg.get("reps", PROFILE_REPS[profile])),
        base_seed=seed if seed is not None else int(cfg.get("seed", 0)),
        regime=cfg.get("regime", "low"),
        majority_grid=floats("majority_grid", toydata.DEFAULT_MAJORITY_GRID),
        shift_grid=floats("shift_grid", toydata.DEFAULT_SHIFT_GRID),
        preset=int(cfg.get("preset", 0)),
        toy=toy,
        train=training.TrainConfig(**train_kwargs),
    )
