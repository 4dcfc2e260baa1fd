"""Adversarial training loop with importance-weighted source losses.

One epoch is one outer iteration of the training scheme: sample a minibatch
pair, run ``critic_iters`` ascent steps on the penalized critic objective,
then one descent step each on the classifier (weighted cross-entropy) and
the feature extractor (weighted cross-entropy plus the weighted critic gap).
The target label-proportion estimate driving the weights is refreshed every
``refresh_period`` epochs from the current latents.

Baselines share the same engine: Source-only drops the critic and the
weights; the relaxed-alignment baseline fixes all weights to 1/(1+beta).

Architectures are fixed: feature extractor 2x{hidden} ReLU, classifier
2x{hidden} ReLU plus logit head, critic 3x{hidden} ReLU plus scalar head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import EmptyTestSet, MissingClass, NonFiniteLoss
from .proportions import ImportanceWeights, ProportionEstimate, estimate_target_proportions, importance_weights
from .toydata import LabeledDataset

METHOD_MARSG = "MARSg"
METHOD_MARSC = "MARSc"
METHOD_SOURCE_ONLY = "SourceOnly"
METHOD_WD_BETA = "WDBeta"
TRAIN_METHODS = (METHOD_MARSG, METHOD_MARSC, METHOD_SOURCE_ONLY, METHOD_WD_BETA)

_ESTIMATOR_FOR_METHOD = {METHOD_MARSG: "gmm", METHOD_MARSC: "agglomerative"}


@dataclass
class TrainConfig:
    method: str = METHOD_MARSC
    epochs: int = 100
    batch_size: int = 128
    critic_iters: int = 5
    lam: float = 1.0              # weight of the critic gap in the feature update
    beta: float = 0.0             # relaxation of the WDBeta baseline
    refresh_period: int = 10
    lr_critic: float = 0.005
    lr_classifier: float = 0.05
    lr_features: float = 0.05
    weight_decay: float = 1e-4
    gp_coeff: float = 10.0
    weight_floor: float = 1e-3
    optimizer: str = "sgd"
    hidden_units: int = 200
    gmm_max_iter: int = 100
    # Cap on the global gradient norm of any single update.  Healthy runs sit
    # far below it; it stops the critic's multiplicative blow-up when the
    # relaxed baseline's objective is unbounded in the critic offset.
    clip_grad_norm: float = 100.0
    seed: int = 0
    # When set, skip estimation and use these target proportions directly.
    forced_p_target: tuple | None = None

    def __post_init__(self):
        if self.method not in TRAIN_METHODS:
            raise ValueError(f"method must be one of {TRAIN_METHODS}, got {self.method!r}")
        if self.batch_size < 2 or self.critic_iters < 1:
            raise ValueError("need batch_size >= 2 and critic_iters >= 1")
        if self.lam < 0 or self.beta < 0 or self.epochs < 0:
            raise ValueError("lam, beta and epochs must be nonnegative")

    def label(self) -> str:
        if self.method == METHOD_WD_BETA:
            return f"WDBeta{self.beta:g}"
        return self.method


@dataclass
class EvalReport:
    balanced_accuracy: float
    per_class_recall: np.ndarray  # NaN for classes absent from the test set
    confusion: np.ndarray         # rows = true class, columns = predicted
    absent_classes: list = field(default_factory=list)


@dataclass
class TrainedModel:
    features: nn.Mlp
    classifier: nn.Mlp
    proportion_estimate: ProportionEstimate | None
    log: list           # one dict per epoch run
    n_classes: int
    config: TrainConfig


def train_mars(config: TrainConfig, source: LabeledDataset, target: LabeledDataset) -> TrainedModel:
    """Full model: estimated proportions, weighted losses, critic alignment."""
    if config.method not in (METHOD_MARSG, METHOD_MARSC):
        raise ValueError(f"train_mars needs a MARS method, got {config.method!r}")
    return _train(config, source, target)


def train_source_only(config: TrainConfig, source: LabeledDataset,
                      target: LabeledDataset | None = None) -> TrainedModel:
    """Supervised training on the source only; target used for logging if given."""
    if config.method != METHOD_SOURCE_ONLY:
        raise ValueError(f"train_source_only needs method {METHOD_SOURCE_ONLY!r}")
    return _train(config, source, target)


def train_wd_beta(config: TrainConfig, source: LabeledDataset, target: LabeledDataset) -> TrainedModel:
    """Alignment with the constant relaxed weight 1/(1+beta), no estimation."""
    if config.method != METHOD_WD_BETA:
        raise ValueError(f"train_wd_beta needs method {METHOD_WD_BETA!r}")
    return _train(config, source, target)


def _train(config: TrainConfig, source: LabeledDataset, target: LabeledDataset | None) -> TrainedModel:
    xs = np.asarray(source.points, dtype=float)
    ys = np.asarray(source.labels, dtype=int)
    n_classes = int(ys.max()) + 1
    p_src = np.bincount(ys, minlength=n_classes) / ys.size
    if np.any(p_src == 0):
        raise MissingClass("source must cover every class")

    uses_critic = config.method != METHOD_SOURCE_ONLY
    if uses_critic and target is None:
        raise ValueError("alignment methods need a target sample")
    xt = np.asarray(target.points, dtype=float) if target is not None else None
    yt = np.asarray(target.labels, dtype=int) if target is not None and target.labels is not None else None

    # One stream per purpose: methods that skip a stream (no critic, no
    # target batches) still draw identical values from the streams they share.
    init_ss, src_batch_ss, tgt_batch_ss, critic_ss, prop_ss = np.random.SeedSequence(config.seed).spawn(5)
    init_rng = np.random.default_rng(init_ss)
    src_batch_rng = np.random.default_rng(src_batch_ss)
    tgt_batch_rng = np.random.default_rng(tgt_batch_ss)
    critic_rng = np.random.default_rng(critic_ss)
    prop_rng = np.random.default_rng(prop_ss)

    hid = config.hidden_units
    g = nn.init_mlp([xs.shape[1], hid, hid], init_rng, activations=[nn.RELU, nn.RELU])
    h = nn.init_mlp([hid, hid, hid, n_classes], init_rng)
    opt_g = nn.make_optimizer(config.optimizer, config.lr_features, g)
    opt_h = nn.make_optimizer(config.optimizer, config.lr_classifier, h)
    critic = opt_v = None
    if uses_critic:
        critic = nn.init_mlp([hid, hid, hid, hid, 1], init_rng)
        opt_v = nn.make_optimizer(config.optimizer, config.lr_critic, critic)

    estimator = _ESTIMATOR_FOR_METHOD.get(config.method)
    weights = _initial_weights(config, p_src, n_classes)
    estimate = None
    truth_p = None
    if yt is not None:
        truth_p = np.bincount(yt, minlength=n_classes) / yt.size

    log = []
    bs = config.batch_size
    for epoch in range(config.epochs):
        if estimator is not None and config.forced_p_target is None and epoch % config.refresh_period == 0:
            z_src = nn.forward(g, xs)
            z_tgt = nn.forward(g, xt)
            estimate = estimate_target_proportions(
                z_src, ys, z_tgt, n_classes, method=estimator,
                seed=int(prop_rng.integers(2 ** 63)),
                gmm_max_iter=config.gmm_max_iter,
            )
            weights = importance_weights(p_src, estimate.p_target, config.weight_floor)

        idx_s = src_batch_rng.choice(xs.shape[0], size=min(bs, xs.shape[0]), replace=False)
        xb_s, yb_s = xs[idx_s], ys[idx_s]
        w_batch = weights.w[yb_s]

        loss_wd = grad_pen = 0.0
        critic_monotone = None
        if uses_critic:
            idx_t = tgt_batch_rng.choice(xt.shape[0], size=min(bs, xt.shape[0]), replace=False)
            xb_t = xt[idx_t]
            zb_s = nn.forward(g, xb_s)
            zb_t = nn.forward(g, xb_t)
            # One interpolation draw per outer step keeps the inner ascent a
            # deterministic objective, so its monotonicity is checkable.
            gp_seed = int(critic_rng.integers(2 ** 63))
            objectives = []
            for _ in range(config.critic_iters):
                grad_pen, gp_tape = nn.gradient_penalty(critic, zb_s, zb_t, gp_seed)
                loss_wd, wd_tape, _, _ = nn.wasserstein_dual_loss(critic, zb_s, zb_t, w_batch)
                objectives.append(loss_wd - config.gp_coeff * grad_pen)
                tape_v = nn.add_scaled(wd_tape, gp_tape, -config.gp_coeff)
                _clip_tape(tape_v, config.clip_grad_norm)
                nn.step(opt_v, critic, tape_v, "ascend")
            grad_pen, _ = nn.gradient_penalty(critic, zb_s, zb_t, gp_seed)
            loss_wd, wd_tape, dz_s, dz_t = nn.wasserstein_dual_loss(critic, zb_s, zb_t, w_batch)
            objectives.append(loss_wd - config.gp_coeff * grad_pen)
            critic_monotone = bool(np.all(np.diff(objectives) >= -1e-9))

        # Classifier and feature updates on the same minibatch.
        zb_s_cached, cache_gs = nn.forward_cache(g, xb_s)
        logits, cache_h = nn.forward_cache(h, zb_s_cached)
        loss_cls, dlogits = nn.weighted_cross_entropy(logits, yb_s, weights.w)
        tape_h = nn.backward(h, cache_h, dlogits)
        tape_g = nn.backward(g, cache_gs, tape_h.dinput)
        if uses_critic and config.lam > 0:
            _, cache_gt = nn.forward_cache(g, xb_t)
            nn.add_scaled(tape_g, nn.backward(g, cache_gs, dz_s), config.lam)
            nn.add_scaled(tape_g, nn.backward(g, cache_gt, dz_t), config.lam)

        if not (np.isfinite(loss_cls) and np.isfinite(loss_wd) and np.isfinite(grad_pen)):
            raise NonFiniteLoss(
                f"non-finite loss at epoch {epoch}: cls={loss_cls}, wd={loss_wd}, gp={grad_pen}"
            )

        _apply_weight_decay(tape_h, h, config.weight_decay)
        _apply_weight_decay(tape_g, g, config.weight_decay)
        _clip_tape(tape_h, config.clip_grad_norm)
        _clip_tape(tape_g, config.clip_grad_norm)
        nn.step(opt_h, h, tape_h, "descend")
        nn.step(opt_g, g, tape_g, "descend")

        p_hat = estimate.p_target if estimate is not None else (
            np.asarray(config.forced_p_target) if config.forced_p_target is not None else None)
        l1 = float(np.abs(p_hat - truth_p).sum()) if (p_hat is not None and truth_p is not None) else None
        log.append({
            "epoch": epoch,
            "loss_cls": loss_cls,
            "loss_wd": loss_wd,
            "grad_penalty": grad_pen,
            "p_hat": tuple(p_hat) if p_hat is not None else None,
            "l1_error": l1,
            "bacc_source": _balanced_accuracy(_predict(g, h, xs), ys, n_classes),
            "bacc_target": _balanced_accuracy(_predict(g, h, xt), yt, n_classes) if yt is not None else None,
            "weights": tuple(weights.w),
            "critic_monotone": critic_monotone,
        })

    return TrainedModel(g, h, estimate, log, n_classes, config)


def _initial_weights(config: TrainConfig, p_src: np.ndarray, n_classes: int) -> ImportanceWeights:
    if config.forced_p_target is not None:
        return importance_weights(p_src, np.asarray(config.forced_p_target, dtype=float),
                                  config.weight_floor)
    if config.method == METHOD_WD_BETA:
        w = np.full(n_classes, 1.0 / (1.0 + config.beta))
        return ImportanceWeights(w=w, raw=w.copy())
    # MARS before the first refresh (epoch 0 refresh overwrites immediately)
    # and Source-only throughout.
    return ImportanceWeights(w=np.ones(n_classes), raw=np.ones(n_classes))


def _clip_tape(tape: nn.GradTape, max_norm: float) -> None:
    total = 0.0
    for arr in (*tape.dweights, *tape.dbiases):
        total += float(np.sum(arr * arr))
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for arr in (*tape.dweights, *tape.dbiases):
            arr *= scale


def _apply_weight_decay(tape: nn.GradTape, mlp: nn.Mlp, coeff: float) -> None:
    if coeff == 0:
        return
    for dw, db, layer in zip(tape.dweights, tape.dbiases, mlp.layers):
        dw += coeff * layer.weight
        db += coeff * layer.bias


def _predict(g: nn.Mlp, h: nn.Mlp, x: np.ndarray) -> np.ndarray:
    return np.argmax(nn.forward(h, nn.forward(g, x)), axis=1)


def _balanced_accuracy(pred: np.ndarray, truth: np.ndarray, n_classes: int) -> float:
    recalls = []
    for k in range(n_classes):
        mask = truth == k
        if np.any(mask):
            recalls.append(float(np.mean(pred[mask] == k)))
    return float(np.mean(recalls))


def evaluate(trained: TrainedModel, test: LabeledDataset) -> EvalReport:
    """Argmax predictions scored by mean per-class recall.

    Classes absent from the test set are excluded from the mean and listed
    in the report.
    """
    x = np.asarray(test.points, dtype=float)
    y = np.asarray(test.labels, dtype=int)
    if x.shape[0] == 0:
        raise EmptyTestSet("test set is empty")
    c = trained.n_classes
    pred = _predict(trained.features, trained.classifier, x)
    confusion = np.zeros((c, c), dtype=int)
    np.add.at(confusion, (y, pred), 1)
    recall = np.full(c, np.nan)
    absent = []
    for k in range(c):
        row = confusion[k].sum()
        if row == 0:
            absent.append(k)
        else:
            recall[k] = confusion[k, k] / row
    return EvalReport(
        balanced_accuracy=float(np.nanmean(recall)),
        per_class_recall=recall,
        confusion=confusion,
        absent_classes=absent,
    )


def write_training_log(trained: TrainedModel, path) -> None:
    """Per-epoch CSV: losses, penalty, estimate, error, and accuracies."""
    c = trained.n_classes
    p_cols = ",".join(f"p_hat_{k}" for k in range(c))
    with open(path, "w") as fh:
        fh.write("# matchreweight-training-log v1\n")
        fh.write(f"epoch,loss_cls,loss_wd,grad_penalty,{p_cols},l1_error,bacc_source,bacc_target\n")
        for row in trained.log:
            p_hat = row["p_hat"]
            p_txt = ",".join(_fmt(v) for v in p_hat) if p_hat is not None else "," * (c - 1)
            fh.write(",".join([
                str(row["epoch"]),
                _fmt(row["loss_cls"]),
                _fmt(row["loss_wd"]),
                _fmt(row["grad_penalty"]),
                p_txt,
                _fmt(row["l1_error"]),
                _fmt(row["bacc_source"]),
                _fmt(row["bacc_target"]),
            ]) + "\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"
