import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uhebo.errors import InvalidInputError, InvalidStateError
from uhebo.estimation import (
    MAP,
    MLL,
    EstimatorConfig,
    PseudoDataset,
    estimate_consistent,
    estimate_map,
    match_nearest,
    minimize_loss,
    pseudo_loss_gap,
    sample_pseudo,
)
from uhebo.gp import Dataset, Hyperparams, gram, loss_and_gradient


def brute_force_nearest(queries, points):
    out = []
    for q in queries:
        best, best_d = 0, np.inf
        for i, p in enumerate(points):
            dist = np.sqrt(np.sum((q - p) ** 2))
            if dist < best_d:
                best, best_d = i, dist
        out.append(best)
    return np.array(out)


def box(d):
    return np.tile([0.0, 1.0], (d, 1))


class TestMatchNearest:
    def test_coincident_point(self):
        data = Dataset(np.array([[0.1, 0.2], [0.7, 0.7]]), np.array([1.0, 2.0]), box(2))
        pseudo = match_nearest(data, np.array([[0.7, 0.7]]))
        assert pseudo.matched_indices[0] == 1
        assert pseudo.pseudo_values[0] == 2.0

    def test_one_dimensional(self):
        data = Dataset(np.array([[0.0], [1.0]]), np.array([5.0, 6.0]), box(1))
        assert match_nearest(data, np.array([[0.4]])).matched_indices[0] == 0
        assert match_nearest(data, np.array([[0.6]])).matched_indices[0] == 1

    def test_tie_goes_to_lowest_index(self):
        data = Dataset(np.array([[0.0], [1.0]]), np.array([5.0, 6.0]), box(1))
        assert match_nearest(data, np.array([[0.5]])).matched_indices[0] == 0

    def test_empty_dataset(self):
        with pytest.raises(InvalidStateError):
            match_nearest(Dataset.empty(box(2)), np.array([[0.5, 0.5]]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d, n, m = int(rng.integers(1, 7)), int(rng.integers(1, 51)), int(rng.integers(1, 30))
            pts = rng.random((n, d))
            if rng.random() < 0.3:  # force exact duplicates to exercise tie-breaking
                pts[rng.integers(n)] = pts[rng.integers(n)]
            q = rng.random((m, d))
            got = match_nearest(Dataset(pts, rng.random(n), box(d)), q).matched_indices
            np.testing.assert_array_equal(got, brute_force_nearest(q, pts))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 4), st.floats(1.0, 4.0), st.integers(0, 2**31))
    def test_pseudo_dataset_invariants(self, n, d, factor, seed):
        rng = np.random.default_rng(seed)
        data = Dataset(rng.random((n, d)), rng.standard_normal(n), box(d))
        cfg = EstimatorConfig(mt_factor=factor)
        pseudo = sample_pseudo(data, cfg, rng)
        assert len(pseudo) == cfg.n_pseudo(n) >= n
        assert len(pseudo.random_points) == len(pseudo.matched_indices) == len(pseudo)
        np.testing.assert_array_equal(pseudo.pseudo_values, data.values[pseudo.matched_indices])
        dists = np.linalg.norm(pseudo.random_points[:, None] - data.points[None], axis=2)
        chosen = dists[np.arange(len(pseudo)), pseudo.matched_indices]
        assert np.all(chosen <= dists.min(axis=1))
        assert np.all((pseudo.random_points >= 0) & (pseudo.random_points <= 1))


class TestConfig:
    def test_mt_rule(self):
        assert EstimatorConfig(mt_factor=2).n_pseudo(7) == 14
        assert EstimatorConfig(mt_factor=1.5).n_pseudo(3) == 5
        assert EstimatorConfig(mt_factor=1.1).n_pseudo(10) == 11

    def test_mt_factor_below_one_rejected(self):
        with pytest.raises(InvalidInputError):
            EstimatorConfig(mt_factor=0.9)

    def test_bad_loss_kind(self):
        with pytest.raises(InvalidInputError):
            EstimatorConfig(loss_kind="ML")

    def test_priors_only_for_map(self):
        assert EstimatorConfig(loss_kind=MLL).active_priors() is None
        assert EstimatorConfig(loss_kind=MAP).active_priors() is not None

    def test_pseudo_dataset_length_check(self):
        with pytest.raises(InvalidInputError):
            PseudoDataset(np.zeros((2, 1)), np.array([0]), np.array([1.0, 2.0]))


def sample_gp(theta, n, d, rng):
    X = rng.random((n, d))
    K = gram(X, X, theta) + theta.noise_variance * np.eye(n)
    return X, np.linalg.cholesky(K) @ rng.standard_normal(n)


class TestEstimateMap:
    def test_recovers_lengthscale(self):
        truth = Hyperparams([0.2], 1.0, 0.01)
        cfg = EstimatorConfig()
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X, y = sample_gp(truth, 200, 1, rng)
            est = estimate_map(Dataset(X, y, box(1)), cfg, rng)
            hits += abs(est.lengthscales[0] / 0.2 - 1) <= 0.25
        assert hits >= 16

    def test_not_worse_than_grid(self):
        rng = np.random.default_rng(1)
        X, y = sample_gp(Hyperparams([0.3], 1.0, 0.01), 60, 1, rng)
        cfg = EstimatorConfig()
        theta, loss = minimize_loss((X, y), cfg, rng)
        grid = [
            loss_and_gradient((X, y), theta.with_lengthscales([ls]), cfg.priors)[0]
            for ls in np.geomspace(0.01, 3, 400)
        ]
        assert loss <= min(grid) + 1e-6

    def test_more_restarts_never_worse(self):
        X, y = sample_gp(Hyperparams([0.1, 0.5], 1.0, 0.01), 40, 2, np.random.default_rng(2))
        one = minimize_loss((X, y), EstimatorConfig(restarts=1), np.random.default_rng(9))[1]
        five = minimize_loss((X, y), EstimatorConfig(restarts=5), np.random.default_rng(9))[1]
        assert five <= one

    def test_deterministic(self):
        X, y = sample_gp(Hyperparams([0.3], 1.0, 0.01), 30, 1, np.random.default_rng(3))
        data = Dataset(X, y, box(1))
        a = estimate_map(data, EstimatorConfig(), np.random.default_rng(4))
        b = estimate_map(data, EstimatorConfig(), np.random.default_rng(4))
        assert a == b

    def test_respects_bounds(self):
        X, y = sample_gp(Hyperparams([0.3], 1.0, 0.01), 30, 1, np.random.default_rng(5))
        cfg = EstimatorConfig()
        th = estimate_map(Dataset(X, y, box(1)), cfg, np.random.default_rng(0))
        lb = np.exp(cfg.log_bounds(1))
        v = np.concatenate([th.lengthscales, [th.signal_variance, th.noise_variance]])
        assert np.all(v >= lb[:, 0] * (1 - 1e-12)) and np.all(v <= lb[:, 1] * (1 + 1e-12))

    def test_empty_pairs(self):
        with pytest.raises(InvalidStateError):
            minimize_loss((np.empty((0, 1)), np.empty(0)), EstimatorConfig(), np.random.default_rng())


class TestConsistent:
    def test_empty_dataset(self):
        with pytest.raises(InvalidStateError):
            estimate_consistent(Dataset.empty(box(1)), EstimatorConfig(), np.random.default_rng())

    def test_pseudo_size_and_values(self):
        rng = np.random.default_rng(6)
        X, y = sample_gp(Hyperparams([0.3, 0.3], 1.0, 0.01), 7, 2, rng)
        data = Dataset(X, y, box(2))
        theta, pseudo = estimate_consistent(data, EstimatorConfig(), rng)
        assert len(pseudo) == 14
        assert set(pseudo.pseudo_values) <= set(y)
        assert theta.dim == 2

    def test_coincident_points_give_standard_loss(self):
        rng = np.random.default_rng(7)
        X, y = sample_gp(Hyperparams([0.3], 1.0, 0.01), 6, 1, rng)
        data = Dataset(X, y, box(1))
        idx = np.array([0, 3, 3, 5, 1, 0, 2, 4])
        pseudo = match_nearest(data, X[idx])
        np.testing.assert_array_equal(pseudo.matched_indices, idx)
        theta = Hyperparams([0.25], 0.8, 0.02)
        assert loss_and_gradient(pseudo, theta)[0] == loss_and_gradient((X[idx], y[idx]), theta)[0]

    def test_same_rng_same_estimate(self):
        X, y = sample_gp(Hyperparams([0.3], 1.0, 0.01), 20, 1, np.random.default_rng(8))
        data = Dataset(X, y, box(1))
        a, pa = estimate_consistent(data, EstimatorConfig(), np.random.default_rng(1))
        b, pb = estimate_consistent(data, EstimatorConfig(), np.random.default_rng(1))
        assert a == b
        np.testing.assert_array_equal(pa.random_points, pb.random_points)


class TestLossGap:
    def test_zero_when_labels_exact(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.random((10, 2)), rng.standard_normal(10), box(2))
        pseudo = match_nearest(data, rng.random((20, 2)))
        theta = Hyperparams([0.3, 0.3], 1.0, 0.01)
        assert pseudo_loss_gap(pseudo, pseudo.pseudo_values, theta) == 0.0

    def test_per_point_normalisation(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.random((10, 2)), rng.standard_normal(10), box(2))
        pseudo = match_nearest(data, rng.random((20, 2)))
        truth = rng.standard_normal(20)
        theta = Hyperparams([0.3, 0.3], 1.0, 0.01)
        a = loss_and_gradient(pseudo, theta)[0]
        b = loss_and_gradient((pseudo.random_points, truth), theta)[0]
        assert pseudo_loss_gap(pseudo, truth, theta, EstimatorConfig(loss_kind=MLL)) == (
            pytest.approx(abs(a - b) / 20, rel=1e-12)
        )

    def test_shape_checked(self):
        rng = np.random.default_rng(2)
        data = Dataset(rng.random((4, 1)), rng.random(4), box(1))
        pseudo = match_nearest(data, rng.random((8, 1)))
        with pytest.raises(InvalidInputError):
            pseudo_loss_gap(pseudo, np.zeros(3), Hyperparams([0.3], 1.0, 0.01))
