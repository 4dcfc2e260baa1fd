import numpy as np
import pytest

from matchreweight import mixtures
from matchreweight.errors import DegenerateInput, DimensionMismatch, EmptyCluster, EmptyInput


def make_blobs(rng, means, counts, scale=0.3):
    pts, labels = [], []
    for k, (m, c) in enumerate(zip(means, counts)):
        pts.append(rng.normal(loc=m, scale=np.sqrt(scale), size=(c, len(m))))
        labels.append(np.full(c, k))
    x = np.vstack(pts)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return x[order], y[order]


TRIANGLE = np.array([[0.0, 4.0], [-4.0, -2.0], [4.0, -2.0]])


def partition_agreement(a, b):
    """1.0 iff the two labelings induce the same partition."""
    a = np.asarray(a)
    b = np.asarray(b)
    same_a = a[:, None] == a[None, :]
    same_b = b[:, None] == b[None, :]
    return float(np.mean(same_a == same_b))


class TestGmmFit:
    def test_identical_points_single_component(self):
        pts = np.tile([1.5, -2.0], (20, 1))
        model = mixtures.gmm_fit(pts, 1, seed=0)
        assert np.allclose(model.means[0], [1.5, -2.0])
        assert model.proportions.tolist() == [1.0]

    def test_recovers_imbalanced_proportions(self):
        rng = np.random.default_rng(0)
        x, y = make_blobs(rng, TRIANGLE, [800, 100, 100])
        model = mixtures.gmm_fit(x, 3, seed=1)
        empirical = np.bincount(y, minlength=3) / len(y)
        err = np.abs(np.sort(model.proportions) - np.sort(empirical)).sum()
        assert err <= 0.05

    def test_recovers_mid_heavy_proportions(self):
        # 0.2/0.6/0.2 split on separated components.
        rng = np.random.default_rng(2)
        x, y = make_blobs(rng, TRIANGLE, [200, 600, 200])
        model = mixtures.gmm_fit(x, 3, seed=3)
        empirical = np.bincount(y, minlength=3) / len(y)
        err = np.abs(np.sort(model.proportions) - np.sort(empirical)).sum()
        assert err <= 0.05

    def test_loglik_nondecreasing(self):
        rng = np.random.default_rng(4)
        for seed in range(5):
            x, _ = make_blobs(rng, TRIANGLE * 0.3, [60, 50, 40], scale=1.0)
            model = mixtures.gmm_fit(x, 3, seed=seed)
            diffs = np.diff(model.log_likelihoods)
            assert np.all(diffs >= -1e-8)

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(5)
        x, _ = make_blobs(rng, TRIANGLE, [100, 80, 60])
        m1 = mixtures.gmm_fit(x, 3, seed=42)
        m2 = mixtures.gmm_fit(x, 3, seed=42)
        assert np.array_equal(m1.means, m2.means)
        assert np.array_equal(m1.covariances, m2.covariances)
        assert np.array_equal(m1.proportions, m2.proportions)

    def test_permutation_equivariance_of_init(self):
        rng = np.random.default_rng(6)
        x, _ = make_blobs(rng, TRIANGLE, [90, 70, 50])
        init = mixtures.gmm_fit(x, 3, seed=7, max_iter=1)
        perm = np.array([2, 0, 1])
        init_perm = mixtures.MixtureModel(
            init.means[perm].copy(), init.covariances[perm].copy(), init.proportions[perm].copy()
        )
        fit = mixtures.gmm_fit(x, 3, init=init, max_iter=50)
        fit_perm = mixtures.gmm_fit(x, 3, init=init_perm, max_iter=50)
        assert np.allclose(fit.means[perm], fit_perm.means)
        assert np.allclose(fit.proportions[perm], fit_perm.proportions)

    def test_proportions_simplex(self):
        rng = np.random.default_rng(8)
        x = rng.random((40, 3))
        model = mixtures.gmm_fit(x, 4, seed=9)
        assert np.all(model.proportions >= 0)
        assert model.proportions.sum() == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_input(self):
        with pytest.raises(DegenerateInput):
            mixtures.gmm_fit(np.zeros((2, 2)), 3, seed=0)


class TestResponsibilities:
    def test_single_component(self):
        model = mixtures.gmm_fit(np.random.default_rng(0).random((10, 2)), 1, seed=0)
        resp = mixtures.gmm_responsibilities(model, np.zeros((5, 2)))
        assert np.allclose(resp, 1.0)

    def test_one_hot_at_far_component_mean(self):
        model = mixtures.MixtureModel(
            means=np.array([[0.0, 0.0], [50.0, 50.0]]),
            covariances=np.tile(np.eye(2), (2, 1, 1)),
            proportions=np.array([0.5, 0.5]),
        )
        resp = mixtures.gmm_responsibilities(model, np.array([[50.0, 50.0]]))
        assert resp[0, 1] >= 0.999
        # Cross-check against direct density evaluation.
        direct = np.exp(mixtures._log_gaussian(np.array([[50.0, 50.0]]), model.means[1], model.covariances[1]))
        other = np.exp(mixtures._log_gaussian(np.array([[50.0, 50.0]]), model.means[0], model.covariances[0]))
        assert resp[0, 1] == pytest.approx(direct / (direct + other), abs=1e-12)

    def test_midpoint_symmetric(self):
        model = mixtures.MixtureModel(
            means=np.array([[-1.0, 0.0], [1.0, 0.0]]),
            covariances=np.tile(np.eye(2), (2, 1, 1)),
            proportions=np.array([0.5, 0.5]),
        )
        resp = mixtures.gmm_responsibilities(model, np.array([[0.0, 0.0]]))
        assert resp[0] == pytest.approx([0.5, 0.5], abs=1e-6)

    def test_rows_simplex(self):
        rng = np.random.default_rng(10)
        x, _ = make_blobs(rng, TRIANGLE, [30, 30, 30])
        model = mixtures.gmm_fit(x, 3, seed=11)
        resp = mixtures.gmm_responsibilities(model, x)
        assert np.allclose(resp.sum(axis=1), 1.0, atol=1e-9)

    def test_dim_mismatch(self):
        model = mixtures.gmm_fit(np.random.default_rng(0).random((10, 2)), 1, seed=0)
        with pytest.raises(DimensionMismatch):
            mixtures.gmm_responsibilities(model, np.zeros((4, 3)))


class TestAgglomerative:
    def test_each_point_own_cluster(self):
        x = np.random.default_rng(0).random((6, 2))
        assert mixtures.agglomerative_cluster(x, 6).tolist() == list(range(6))

    def test_recovers_blobs(self):
        rng = np.random.default_rng(1)
        x, y = make_blobs(rng, TRIANGLE, [50, 40, 30])
        labels = mixtures.agglomerative_cluster(x, 3)
        assert partition_agreement(labels, y) == 1.0

    def test_duplicates_share_label(self):
        rng = np.random.default_rng(2)
        x = rng.random((10, 2))
        x[7] = x[2]
        labels = mixtures.agglomerative_cluster(x, 4)
        assert labels[7] == labels[2]

    def test_order_invariant_partition(self):
        rng = np.random.default_rng(3)
        x, _ = make_blobs(rng, TRIANGLE, [40, 30, 20])
        labels = mixtures.agglomerative_cluster(x, 3)
        for seed in range(3):
            perm = np.random.default_rng(seed).permutation(len(x))
            shuffled = mixtures.agglomerative_cluster(x[perm], 3)
            restored = np.empty_like(shuffled)
            restored[perm] = shuffled
            assert partition_agreement(labels, restored) == 1.0

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            mixtures.agglomerative_cluster(np.zeros((2, 2)), 3)


class TestClusterStats:
    def test_proportions_basic(self):
        assert mixtures.cluster_proportions([0, 0, 0, 1], 2).tolist() == [0.75, 0.25]

    def test_proportions_uniform(self):
        labels = np.repeat([0, 1, 2], 100)
        assert np.allclose(mixtures.cluster_proportions(labels, 3), 1 / 3)

    def test_proportions_match_counts(self):
        rng = np.random.default_rng(4)
        labels = rng.choice(3, size=1000, p=[0.8, 0.1, 0.1])
        props = mixtures.cluster_proportions(labels, 3)
        assert np.array_equal(props * 1000, np.bincount(labels, minlength=3))

    def test_proportions_empty(self):
        with pytest.raises(EmptyInput):
            mixtures.cluster_proportions([], 2)

    def test_means_single_points(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        means = mixtures.cluster_means(x, [0, 1], 2)
        assert np.array_equal(means, x)

    def test_means_midpoint(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0]])
        means = mixtures.cluster_means(x, [0, 0], 1)
        assert np.allclose(means[0], [0.0, 0.0])

    def test_means_match_bruteforce(self):
        rng = np.random.default_rng(5)
        x = rng.random((50, 3))
        labels = rng.integers(0, 4, size=50)
        labels[:4] = [0, 1, 2, 3]  # every cluster populated
        means = mixtures.cluster_means(x, labels, 4)
        for k in range(4):
            assert np.allclose(means[k], x[labels == k].mean(axis=0))

    def test_means_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            mixtures.cluster_means(np.zeros((3, 2)), [0, 0, 1], 3)
