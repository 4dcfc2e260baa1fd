"""Target label-proportion estimation by mode matching.

Fit a C-mode mixture on the unlabeled target sample, match its modes to the
source classes with optimal assignment on squared distances between mean
vectors, and read the matched mode proportions as the target label
distribution.  The ratio against the source label distribution then gives
per-class importance weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mixtures, ot
from .errors import DimensionMismatch, MissingClass, ZeroSourceClass

METHOD_GMM = "gmm"
METHOD_AGGLOMERATIVE = "agglomerative"
METHODS = (METHOD_GMM, METHOD_AGGLOMERATIVE)


@dataclass(frozen=True)
class ProportionEstimate:
    """Estimated target label distribution, in source-class order.

    ``permutation[i]`` is the target mode matched to source class i;
    ``mode_proportions`` are the raw mixture proportions before matching.
    """

    p_target: np.ndarray
    permutation: np.ndarray
    method: str
    mode_proportions: np.ndarray


@dataclass(frozen=True)
class ImportanceWeights:
    """Per-class weights p_T(y=k)/p_S(y=k); ``w`` is floored, ``raw`` is not."""

    w: np.ndarray
    raw: np.ndarray


def source_class_means(latents, labels, n_classes: int | None = None):
    """Per-class mean vectors and empirical class proportions of the source.

    Every class in 0..C-1 must have at least one sample.
    """
    x = np.asarray(latents, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"latents {x.shape} and labels {y.shape} are inconsistent")
    c = int(y.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(y, minlength=c)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise MissingClass(f"classes with no source samples: {missing.tolist()}")
    means = np.stack([x[y == k].mean(axis=0) for k in range(c)])
    return means, counts / y.size


def estimate_target_proportions(
    source_latents,
    source_labels,
    target_latents,
    n_classes: int,
    method: str = METHOD_AGGLOMERATIVE,
    seed: int = 0,
    gmm_max_iter: int = 200,
) -> ProportionEstimate:
    """Estimate p_T(y) from unlabeled target latents.

    Steps: fit a C-mode mixture on the target, compute squared Euclidean
    distances between source class means and target mode means, solve the
    uniform-marginal assignment on that cost, and permute the mode
    proportions into source-class order.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    z_t = np.asarray(target_latents, dtype=float)
    src_means, _ = source_class_means(source_latents, source_labels, n_classes)
    if z_t.ndim != 2 or z_t.shape[1] != src_means.shape[1]:
        raise DimensionMismatch(f"target latents {z_t.shape} do not match source dim {src_means.shape[1]}")

    if method == METHOD_GMM:
        model = mixtures.gmm_fit(z_t, n_classes, seed=seed, max_iter=gmm_max_iter)
        mode_means = model.means
        p_u = model.proportions
    else:
        labels = mixtures.agglomerative_cluster(z_t, n_classes)
        mode_means = mixtures.cluster_means(z_t, labels, n_classes)
        p_u = mixtures.cluster_proportions(labels, n_classes)

    cost = np.sum((src_means[:, None, :] - mode_means[None, :, :]) ** 2, axis=2)
    permutation = ot.optimal_assignment(cost)
    return ProportionEstimate(
        p_target=p_u[permutation].copy(),
        permutation=permutation,
        method=method,
        mode_proportions=p_u,
    )


def importance_weights(p_source, p_target, floor: float = 1e-3) -> ImportanceWeights:
    """Per-class ratio p_T/p_S; estimated-zero target classes are floored."""
    ps = np.asarray(p_source, dtype=float)
    pt = np.asarray(p_target, dtype=float)
    if ps.shape != pt.shape:
        raise DimensionMismatch(f"proportion shapes differ: {ps.shape} vs {pt.shape}")
    if np.any(ps <= 0):
        raise ZeroSourceClass("all source class proportions must be positive")
    return ImportanceWeights(w=np.maximum(pt, floor) / ps, raw=pt / ps)
