"""Minimal dense networks with exact reverse-mode gradients, in float64.

The three training roles (feature extractor, classifier, critic) are all
plain ReLU MLPs.  Besides standard parameter/input backprop this module
implements the gradient penalty on the critic, whose parameter gradient
requires differentiating through the input-gradient expression; for a ReLU
network the activation masks are piecewise constant, so that second pass is
again a chain of linear maps (see :func:`gradient_penalty`).

Everything here is deterministic given a seed and double precision
throughout, which keeps finite-difference checks tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch

RELU = "relu"
IDENTITY = "identity"


@dataclass
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str     # RELU or IDENTITY


@dataclass
class Mlp:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])


@dataclass
class GradTape:
    """Per-parameter gradient buffers mirroring an Mlp, plus optional input grads."""

    dweights: list[np.ndarray]
    dbiases: list[np.ndarray]
    dinput: np.ndarray | None = None


def init_mlp(dims, seed_or_rng=0, activations=None) -> Mlp:
    """He-uniform fan-in initialization; hidden layers ReLU, head identity."""
    rng = np.random.default_rng(seed_or_rng)
    dims = list(dims)
    if activations is None:
        activations = [RELU] * (len(dims) - 2) + [IDENTITY]
    layers = []
    for i, act in enumerate(activations):
        fan_in = dims[i]
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(dims[i + 1], fan_in))
        layers.append(Layer(w, np.zeros(dims[i + 1]), act))
    return Mlp(layers)


def _apply(act: str, s: np.ndarray) -> np.ndarray:
    if act == RELU:
        return np.maximum(s, 0.0)
    return s


def forward(mlp: Mlp, x) -> np.ndarray:
    """Batch forward pass, (B, in_dim) -> (B, out_dim)."""
    h = np.asarray(x, dtype=float)
    if h.ndim != 2 or h.shape[1] != mlp.in_dim:
        raise DimensionMismatch(f"input shape {h.shape} does not match in_dim {mlp.in_dim}")
    for layer in mlp.layers:
        h = _apply(layer.activation, h @ layer.weight.T + layer.bias)
    return h


def forward_cache(mlp: Mlp, x):
    """Forward pass retaining layer inputs and preactivations for backprop."""
    h = np.asarray(x, dtype=float)
    if h.ndim != 2 or h.shape[1] != mlp.in_dim:
        raise DimensionMismatch(f"input shape {h.shape} does not match in_dim {mlp.in_dim}")
    inputs, preacts = [], []
    for layer in mlp.layers:
        inputs.append(h)
        s = h @ layer.weight.T + layer.bias
        preacts.append(s)
        h = _apply(layer.activation, s)
    return h, (inputs, preacts)


def backward(mlp: Mlp, cache, dout: np.ndarray) -> GradTape:
    """Reverse pass: gradients of sum(dout * output) w.r.t. params and input.

    The ReLU subgradient at exactly zero is taken as zero.
    """
    inputs, preacts = cache
    dweights = [None] * len(mlp.layers)
    dbiases = [None] * len(mlp.layers)
    delta = np.asarray(dout, dtype=float)
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        if layer.activation == RELU:
            delta = delta * (preacts[i] > 0)
        dweights[i] = delta.T @ inputs[i]
        dbiases[i] = delta.sum(axis=0)
        delta = delta @ layer.weight
    return GradTape(dweights, dbiases, dinput=delta)


def zero_tape(mlp: Mlp) -> GradTape:
    return GradTape(
        [np.zeros_like(l.weight) for l in mlp.layers],
        [np.zeros_like(l.bias) for l in mlp.layers],
    )


def add_scaled(into: GradTape, tape: GradTape, scale: float = 1.0) -> GradTape:
    for dw, tw in zip(into.dweights, tape.dweights):
        dw += scale * tw
    for db, tb in zip(into.dbiases, tape.dbiases):
        db += scale * tb
    return into


def weighted_cross_entropy(logits, labels, class_weights):
    """Mean over the batch of w[y_i] * softmax cross-entropy.

    Returns (loss, dloss/dlogits).
    """
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=int)
    w = np.asarray(class_weights, dtype=float)
    if z.ndim != 2 or y.shape[0] != z.shape[0]:
        raise DimensionMismatch(f"logits {z.shape} vs labels {y.shape}")
    if y.min() < 0 or y.max() >= z.shape[1] or w.shape[0] != z.shape[1]:
        raise DimensionMismatch("labels / class weights do not match logit columns")
    b = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    sample_w = w[y]
    loss = float(np.mean(-sample_w * log_probs[np.arange(b), y]))
    dlogits = np.exp(log_probs)
    dlogits[np.arange(b), y] -= 1.0
    dlogits *= sample_w[:, None] / b
    return loss, dlogits


def wasserstein_dual_loss(critic: Mlp, z_src, z_tgt, src_weights):
    """Weighted critic gap mean(w * v(z_s)) - mean(v(z_t)).

    Returns (loss, critic GradTape, dloss/dz_src, dloss/dz_tgt).  Both terms
    are normalized by their batch size so the loss is batch-size invariant.
    """
    if critic.out_dim != 1:
        raise DimensionMismatch("critic must have a scalar output")
    zs = np.asarray(z_src, dtype=float)
    zt = np.asarray(z_tgt, dtype=float)
    w = np.asarray(src_weights, dtype=float)
    if w.shape[0] != zs.shape[0]:
        raise DimensionMismatch("source weights must have one entry per source sample")
    vs, cache_s = forward_cache(critic, zs)
    vt, cache_t = forward_cache(critic, zt)
    loss = float(np.mean(w * vs[:, 0]) - np.mean(vt[:, 0]))
    tape_s = backward(critic, cache_s, (w / zs.shape[0])[:, None])
    tape_t = backward(critic, cache_t, np.full((zt.shape[0], 1), -1.0 / zt.shape[0]))
    tape = add_scaled(tape_s, tape_t)
    return loss, tape, tape_s.dinput, tape_t.dinput


def gradient_penalty(critic: Mlp, z_src, z_tgt, seed_or_rng):
    """Two-sided penalty mean((||grad_z v(z_hat)|| - 1)^2) on interpolates.

    z_hat = t*z_s + (1-t)*z_t with t ~ U(0,1) per pair.  The parameter
    gradient differentiates the input-gradient chain directly: with ReLU
    masks D_l fixed (their derivative vanishes almost everywhere), the
    per-sample input gradient is r = W_1^T D_1 W_2^T ... W_L^T, so
    d(penalty)/dW_l is an outer product of the backward sensitivities and a
    forward propagation of d(penalty)/dr.  Bias gradients are exactly zero.

    Returns (penalty, critic GradTape).
    """
    if critic.out_dim != 1:
        raise DimensionMismatch("critic must have a scalar output")
    zs = np.asarray(z_src, dtype=float)
    zt = np.asarray(z_tgt, dtype=float)
    if zs.shape != zt.shape:
        raise DimensionMismatch(f"batch shapes differ: {zs.shape} vs {zt.shape}")
    rng = np.random.default_rng(seed_or_rng)
    b = zs.shape[0]
    t = rng.uniform(size=(b, 1))
    z_hat = t * zs + (1.0 - t) * zt

    _, (_, preacts) = forward_cache(critic, z_hat)
    masks = [(s > 0).astype(float) if layer.activation == RELU else np.ones_like(s)
             for layer, s in zip(critic.layers, preacts)]
    n_layers = len(critic.layers)

    # Input-gradient backprop: deltas[i] = d v / d preact_i, per sample.
    deltas = [None] * n_layers
    deltas[-1] = masks[-1].copy()
    for i in range(n_layers - 2, -1, -1):
        deltas[i] = (deltas[i + 1] @ critic.layers[i + 1].weight) * masks[i]
    r = deltas[0] @ critic.layers[0].weight  # (B, in_dim)

    norms = np.sqrt(np.sum(r * r, axis=1))
    penalty = float(np.mean((norms - 1.0) ** 2))

    safe = np.where(norms > 0, norms, 1.0)
    coeff = np.where(norms > 0, 2.0 * (norms - 1.0) / safe, 0.0) / b
    u = coeff[:, None] * r  # d penalty / d r, with batch mean folded in

    tape = zero_tape(critic)
    q = u
    for i in range(n_layers):
        tape.dweights[i][...] = deltas[i].T @ q
        if i + 1 < n_layers:
            q = (q @ critic.layers[i].weight.T) * masks[i]
    return penalty, tape


@dataclass
class Optimizer:
    """SGD or Adam state bound to one Mlp's parameter shapes."""

    kind: str  # "sgd" or "adam"
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")


def make_optimizer(kind: str, lr: float, mlp: Mlp) -> Optimizer:
    opt = Optimizer(kind=kind, lr=lr)
    if kind == "adam":
        for layer in mlp.layers:
            opt.m.extend([np.zeros_like(layer.weight), np.zeros_like(layer.bias)])
            opt.v.extend([np.zeros_like(layer.weight), np.zeros_like(layer.bias)])
    return opt


def step(opt: Optimizer, mlp: Mlp, tape: GradTape, direction: str = "descend") -> None:
    """In-place parameter update; ``ascend`` adds the gradient (critic updates)."""
    if direction not in ("descend", "ascend"):
        raise ValueError(f"direction must be descend or ascend, got {direction!r}")
    sign = -1.0 if direction == "descend" else 1.0
    params = []
    grads = []
    for layer, dw, db in zip(mlp.layers, tape.dweights, tape.dbiases):
        if layer.weight.shape != dw.shape or layer.bias.shape != db.shape:
            raise ShapeMismatch("gradient buffers do not mirror the parameters")
        params.extend([layer.weight, layer.bias])
        grads.extend([dw, db])
    if opt.kind == "sgd":
        for p, g in zip(params, grads):
            p += sign * opt.lr * g
        return
    opt.t += 1
    bias1 = 1.0 - opt.beta1 ** opt.t
    bias2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p += sign * opt.lr * (m / bias1) / (np.sqrt(v / bias2) + opt.eps)


def save_mlp(mlp: Mlp, path) -> None:
    """Plain-text checkpoint: header, then one line per weight row / bias.

    Floats are written with repr, which round-trips float64 exactly, so a
    save/load cycle is bit-reproducible.
    """
    with open(path, "w") as fh:
        fh.write("mlp-checkpoint v1\n")
        fh.write(f"layers {len(mlp.layers)}\n")
        for layer in mlp.layers:
            out_dim, in_dim = layer.weight.shape
            fh.write(f"layer {in_dim} {out_dim} {layer.activation}\n")
            for row in layer.weight:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")
            fh.write(" ".join(repr(float(x)) for x in layer.bias) + "\n")


def load_mlp(path) -> Mlp:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "mlp-checkpoint v1":
            raise ValueError(f"unrecognized checkpoint header: {header!r}")
        n_layers = int(fh.readline().split()[1])
        layers = []
        for _ in range(n_layers):
            _, in_dim, out_dim, activation = fh.readline().split()
            in_dim, out_dim = int(in_dim), int(out_dim)
            rows = [_parse_floats(fh.readline()) for _ in range(out_dim)]
            bias = _parse_floats(fh.readline())
            layers.append(Layer(np.vstack(rows).reshape(out_dim, in_dim), bias, activation))
    return Mlp(layers)


def _parse_floats(line: str) -> np.ndarray:
    return np.array([float(tok) for tok in line.split()])
