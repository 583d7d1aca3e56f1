import math

import numpy as np
import pytest

import ghostcde


def test_geometry():
    assert ghostcde.adjusted_coordinates(60.0, 26.65, "right") == pytest.approx((50.0, 0.0))
    assert ghostcde.adjusted_coordinates(10.0, 3.0, "left")[0] == 0.0
    assert ghostcde.angular_difference(350.0, 10.0) == pytest.approx(20.0)


def test_forest_weights_and_density():
    rng = np.random.default_rng(1)
    X = rng.uniform(-2, 2, size=(300, 3))
    Y = X[:, 0] + rng.normal(0, 0.3, size=300)
    f = ghostcde.train(X, Y, n_trees=20, seed=4)
    assert f.n_trees == 20 and f.n_features == 3 and f.response_dim == 1
    w = f.leaf_weights(X[0])
    assert w.shape == (300,)
    assert (w >= 0).all() and abs(w.sum() - 1.0) < 1e-12
    grid = list(np.linspace(-4, 4, 81))
    d = f.predict_density(X[0], [grid], normalize=True)
    assert abs(d.sum() - 1.0) < 1e-9
    # the conditional mean should follow x1
    lo = f.predict_density(np.array([-1.5, 0, 0]), [grid], normalize=True) @ np.array(grid)
    hi = f.predict_density(np.array([1.5, 0, 0]), [grid], normalize=True) @ np.array(grid)
    assert hi - lo > 2.0


def test_depth0_density_is_plain_kde():
    rng = np.random.default_rng(2)
    Y = rng.normal(size=100)
    X = np.zeros((100, 1))
    f = ghostcde.train(X, Y, n_trees=3, max_depth=0, bootstrap=False)
    grid = np.linspace(-3, 3, 25)
    h = 0.4
    got = f.predict_density(X[0], [list(grid)], bandwidth=[h])
    want = np.exp(-0.5 * ((Y[None, :] - grid[:, None]) / h) ** 2).mean(axis=1) / (math.sqrt(2 * math.pi) * h)
    assert np.max(np.abs(got - want)) < 1e-12


def test_two_dimensional_density_shape():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(120, 2))
    Y = rng.normal(size=(120, 2))
    f = ghostcde.train(X, Y, n_trees=5, n_basis=5)
    d = f.predict_density(X[0], [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0, 3.0]], normalize=True)
    assert d.shape == (3, 4)
    assert abs(d.sum() - 1.0) < 1e-9


def test_forest_save_load(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(80, 2))
    Y = rng.normal(size=80)
    f = ghostcde.train(X, Y, n_trees=4)
    path = tmp_path / "f.bin"
    f.save(path)
    g = ghostcde.Forest.load(path)
    grid = [list(np.linspace(-2, 2, 9))]
    assert np.array_equal(f.predict_density(X[1], grid), g.predict_density(X[1], grid))


def test_yac_grid_and_expected_value():
    yac, td = ghostcde.yac_grid(30.0)
    assert len(yac) == 43 and yac[0] == -10 and yac[-1] == 32
    assert sum(td) == 3
    assert ghostcde.expected_value(np.ones(3), np.array([1.0, 2.0, 3.0])) == pytest.approx(2.0)
    assert ghostcde.play_value(0.0, 1, 10, 40, "left") == 7.0


def test_trajectory_weights_and_sampling():
    w = ghostcde.trajectory_weights((3.0, 0.0), (0.0, 0.0), np.array([2.0, 3.0, 5.0]))
    assert w.argmax() == 1 and abs(w.sum() - 1) < 1e-12
    draws = ghostcde.sample_trajectories(np.array([0.5, 0.3, 0.2]), 20000, 7)
    freq = np.bincount(draws, minlength=3) / 20000
    assert np.allclose(freq, [0.5, 0.3, 0.2], atol=0.02)
    assert draws == ghostcde.sample_trajectories(np.array([0.5, 0.3, 0.2]), 20000, 7)


def test_synthetic_dataset(tmp_path):
    n = ghostcde.write_synthetic_dataset(tmp_path, n_plays=12, weeks=2, seed=3)
    assert n == 12
    for name in ("games.csv", "plays.csv", "tracking.csv", "truth.csv"):
        assert (tmp_path / name).exists()
