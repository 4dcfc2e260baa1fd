"""Target-distribution mixture estimators: Gaussian EM and Ward clustering.

Both estimators produce the ingredients the proportion matcher needs: mode
representatives (means) and mode proportions.  EM is written out here rather
than delegated so that the per-iteration log-likelihood trajectory is
available for monotonicity checks and so the k-means++ initialization is
fully seeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .errors import DegenerateInput, DimensionMismatch, EmptyCluster, EmptyInput

# Relative covariance floor: reg = max(REG_SCALE * trace/d, REG_ABS) on the diagonal.
REG_SCALE = 1e-6
REG_ABS = 1e-12


@dataclass
class MixtureModel:
    """C-component Gaussian mixture over R^d.

    ``log_likelihoods`` records the EM trajectory (one entry per iteration)
    when the model was fitted by :func:`gmm_fit`; it is non-decreasing up to
    round-off.
    """

    means: np.ndarray        # (C, d)
    covariances: np.ndarray  # (C, d, d), symmetric positive definite
    proportions: np.ndarray  # (C,), simplex vector
    log_likelihoods: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _regularize(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    cov = (cov + cov.T) / 2.0
    reg = max(REG_SCALE * np.trace(cov) / d, REG_ABS)
    return cov + reg * np.eye(d)


def _log_gaussian(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = mean.shape[0]
    chol = np.linalg.cholesky(cov)
    diff = points - mean
    sol = np.linalg.solve(chol, diff.T)  # triangular system, (d, n)
    maha = np.sum(sol * sol, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + log_det + d * np.log(2.0 * np.pi))


def _log_joint(model: MixtureModel, points: np.ndarray) -> np.ndarray:
    """log p(x, component k): (n, C)."""
    n = points.shape[0]
    out = np.empty((n, model.n_components))
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.proportions)
    for k in range(model.n_components):
        out[:, k] = log_pi[k] + _log_gaussian(points, model.means[k], model.covariances[k])
    return out


def _kmeanspp_centers(points: np.ndarray, n_components: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding (candidate pool per step, best potential wins)."""
    n = points.shape[0]
    n_candidates = 2 + int(np.log(n_components)) if n_components > 1 else 1
    centers = [points[rng.integers(n)]]
    sq = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, n_components):
        total = sq.sum()
        if total <= 0:  # all remaining points coincide with a chosen center
            cand = [int(rng.integers(n))]
        else:
            cand = rng.choice(n, size=n_candidates, p=sq / total).tolist()
        best_idx, best_pot = None, np.inf
        for c in cand:
            pot = np.minimum(sq, np.sum((points - points[c]) ** 2, axis=1)).sum()
            if pot < best_pot:
                best_idx, best_pot = c, pot
        centers.append(points[best_idx])
        sq = np.minimum(sq, np.sum((points - centers[-1]) ** 2, axis=1))
    return np.asarray(centers)


def _hard_init(points: np.ndarray, centers: np.ndarray) -> MixtureModel:
    n, d = points.shape
    c = centers.shape[0]
    dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(dists, axis=1)
    global_cov = _regularize(np.cov(points.T, bias=True).reshape(d, d))
    means = np.empty((c, d))
    covs = np.empty((c, d, d))
    props = np.empty(c)
    for k in range(c):
        mask = assign == k
        if not np.any(mask):  # duplicate centers can strand a component
            means[k] = centers[k]
            covs[k] = global_cov
            props[k] = 1.0 / n
            continue
        pts = points[mask]
        means[k] = pts.mean(axis=0)
        covs[k] = _regularize(np.cov(pts.T, bias=True).reshape(d, d) if pts.shape[0] > 1 else np.zeros((d, d)))
        props[k] = mask.sum() / n
    props /= props.sum()
    return MixtureModel(means, covs, props)


def gmm_fit(
    points,
    n_components: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    init: MixtureModel | None = None,
    n_init: int = 3,
) -> MixtureModel:
    """Fit a full-covariance Gaussian mixture by EM.

    Converges when the log-likelihood improves by less than ``tol`` per point
    or after ``max_iter`` iterations.  Deterministic for a fixed seed.  A
    covariance floor is applied at every M-step, so singular covariances are
    repaired instead of raised.

    Without an explicit ``init``, the fit restarts ``n_init`` times from
    fresh k-means++ seedings and keeps the best final log-likelihood; heavy
    mode imbalance occasionally strands a single seeding in a split-mode
    optimum.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"points must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if n < n_components or n_components < 1:
        raise DegenerateInput(f"need n >= C >= 1, got n={n}, C={n_components}")

    if init is None:
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(max(1, n_init)):
            start = _hard_init(x, _kmeanspp_centers(x, n_components, rng))
            model = _em_loop(x, start, max_iter, tol)
            if best is None or model.log_likelihoods[-1] > best.log_likelihoods[-1]:
                best = model
        return best
    if init.dim != d or init.n_components != n_components:
        raise DimensionMismatch("init model shape does not match points / n_components")
    start = MixtureModel(init.means.copy(), init.covariances.copy(), init.proportions.copy())
    return _em_loop(x, start, max_iter, tol)


def _em_loop(x: np.ndarray, model: MixtureModel, max_iter: int, tol: float) -> MixtureModel:
    n, _ = x.shape
    n_components = model.n_components
    lls = []
    prev = -np.inf
    for _ in range(max_iter):
        log_joint = _log_joint(model, x)
        log_norm = _logsumexp_rows(log_joint)
        ll = float(log_norm.sum())
        lls.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])

        weights = resp.sum(axis=0)
        model.proportions = weights / n
        for k in range(n_components):
            if weights[k] <= 0:
                continue
            mean = resp[:, k] @ x / weights[k]
            diff = x - mean
            cov = (resp[:, k] * diff.T) @ diff / weights[k]
            model.means[k] = mean
            model.covariances[k] = _regularize(cov)

        if ll - prev < tol * n:
            break
        prev = ll

    model.log_likelihoods = np.asarray(lls)
    return model


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def gmm_responsibilities(model: MixtureModel, points) -> np.ndarray:
    """Posterior component memberships, one simplex row per point."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionMismatch(f"points shape {x.shape} does not match model dim {model.dim}")
    log_joint = _log_joint(model, x)
    return np.exp(log_joint - _logsumexp_rows(log_joint)[:, None])


def agglomerative_cluster(points, n_clusters: int) -> np.ndarray:
    """Ward-linkage agglomerative clustering into exactly ``n_clusters``.

    Labels are canonicalized by order of first appearance, so the output is
    deterministic for a given input ordering.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"points must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n < n_clusters or n_clusters < 1:
        raise DegenerateInput(f"need n >= C >= 1, got n={n}, C={n_clusters}")
    if n_clusters == n:
        return np.arange(n)
    merge_tree = linkage(x, method="ward")
    raw = fcluster(merge_tree, t=n_clusters, criterion="maxclust")
    return _canonical_labels(raw)


def _canonical_labels(raw: np.ndarray) -> np.ndarray:
    mapping: dict[int, int] = {}
    labels = np.empty(raw.shape[0], dtype=int)
    for i, r in enumerate(raw):
        if r not in mapping:
            mapping[r] = len(mapping)
        labels[i] = mapping[r]
    return labels


def cluster_proportions(labels, n_clusters: int) -> np.ndarray:
    """Fraction of points per cluster index."""
    lab = np.asarray(labels, dtype=int)
    if lab.size == 0:
        raise EmptyInput("no labels")
    if lab.min() < 0 or lab.max() >= n_clusters:
        raise DimensionMismatch(f"labels out of range [0, {n_clusters})")
    return np.bincount(lab, minlength=n_clusters) / lab.size


def cluster_means(points, labels, n_clusters: int) -> np.ndarray:
    """Arithmetic mean of each cluster; every cluster must be populated."""
    x = np.asarray(points, dtype=float)
    lab = np.asarray(labels, dtype=int)
    if x.shape[0] != lab.shape[0]:
        raise DimensionMismatch("points and labels lengths differ")
    means = np.empty((n_clusters, x.shape[1]))
    for k in range(n_clusters):
        mask = lab == k
        if not np.any(mask):
            raise EmptyCluster(f"cluster {k} has no points")
        means[k] = x[mask].mean(axis=0)
    return means
