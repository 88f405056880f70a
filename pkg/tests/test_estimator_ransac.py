import numpy as np
import pytest

from slamkit.errors import NoConsensusError
from slamkit.estimator import (
    essential_5pt,
    fundamental_7pt,
    homography_4pt,
    homography_transfer_error,
    pnp_epnp,
    ransac,
    reprojection_error,
    sampson_distance,
    sim3_horn,
    point_distance,
    apply_homography,
)

from geometry_helpers import matrix_close_up_to_scale, pnp_scene, rotation_angle, two_view_scene


def homography_data(n, seed, outlier_ratio=0.0, noise=0.0):
    rng = np.random.default_rng(seed)
    h_true = np.array([[1.05, 0.08, 0.2], [-0.03, 0.97, -0.15], [0.02, -0.01, 1.0]])
    x1 = rng.uniform(-1, 1, size=(n, 2))
    x2 = apply_homography(h_true, x1)
    if noise > 0:
        x2 = x2 + rng.normal(scale=noise, size=x2.shape)
    is_outlier = np.zeros(n, dtype=bool)
    k = int(round(outlier_ratio * n))
    if k:
        idx = rng.choice(n, size=k, replace=False)
        x2[idx] = rng.uniform(-1.5, 1.5, size=(k, 2))
        is_outlier[idx] = True
    return x1, x2, h_true, is_outlier


def hsolver(data):
    return homography_4pt(data[0], data[1])


def hresidual(model, data):
    return homography_transfer_error(model, data[0], data[1])


class TestRansacHomography:
    def test_thirty_percent_outliers(self):
        x1, x2, h_true, is_outlier = homography_data(1000, seed=0, outlier_ratio=0.3)
        result = ransac((x1, x2), 4, hsolver, hresidual,
                        threshold=1e-3, confidence=0.999, max_iters=2000, seed=1)
        true_inliers = ~is_outlier
        recovered = np.sum(result.inlier_mask & true_inliers) / np.sum(true_inliers)
        assert recovered >= 0.99
        assert np.linalg.norm(result.model - h_true) / np.linalg.norm(h_true) < 1e-6

    def test_no_outliers_all_inliers(self):
        x1, x2, _, _ = homography_data(100, seed=2)
        result = ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3, seed=3)
        assert result.inlier_mask.all()
        assert result.inlier_count == 100

    def test_all_outliers_no_consensus(self):
        rng = np.random.default_rng(4)
        for seed in range(10):
            x1 = rng.uniform(-1, 1, size=(60, 2))
            x2 = rng.uniform(-1, 1, size=(60, 2))
            with pytest.raises(NoConsensusError):
                ransac((x1, x2), 4, hsolver, hresidual,
                       threshold=1e-6, max_iters=50, seed=seed)

    def test_deterministic_given_seed(self):
        x1, x2, _, _ = homography_data(300, seed=5, outlier_ratio=0.2)
        r1 = ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3, seed=42)
        r2 = ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3, seed=42)
        assert r1.iterations == r2.iterations
        np.testing.assert_array_equal(r1.inlier_mask, r2.inlier_mask)
        np.testing.assert_array_equal(r1.model, r2.model)

    def test_adaptive_iterations_shrink(self):
        x1, x2, _, _ = homography_data(200, seed=6)
        result = ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3,
                        max_iters=5000, seed=7)
        assert result.iterations < 10  # all-inlier data stops immediately

    def test_iterations_respect_cap(self):
        x1, x2, _, _ = homography_data(200, seed=8, outlier_ratio=0.4)
        result = ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3,
                        max_iters=11, seed=9)
        assert result.iterations <= 11


class TestRansacMultiModel:
    def test_fundamental_7pt_in_ransac(self):
        x1, x2, _, e_true, is_outlier = two_view_scene(
            400, seed=10, outlier_ratio=0.25)
        result = ransac((x1, x2), 7,
                        lambda d: fundamental_7pt(d[0], d[1]),
                        lambda m, d: sampson_distance(m, d[0], d[1]),
                        threshold=1e-3, seed=11, max_iters=500,
                        refit=lambda d: fundamental_8pt_refit(d))
        assert matrix_close_up_to_scale(result.model, e_true, 1e-3)
        assert np.sum(result.inlier_mask & ~is_outlier) / np.sum(~is_outlier) >= 0.99

    def test_essential_5pt_in_ransac(self):
        x1, x2, rel, e_true, is_outlier = two_view_scene(
            300, seed=12, outlier_ratio=0.3)
        result = ransac((x1, x2), 5,
                        lambda d: essential_5pt(d[0], d[1]),
                        lambda m, d: sampson_distance(m, d[0], d[1]),
                        threshold=1e-3, seed=13, max_iters=500)
        assert matrix_close_up_to_scale(result.model, e_true, 1e-3)

    def test_epnp_in_ransac(self):
        w, x, pose, is_outlier = pnp_scene(400, seed=14, outlier_ratio=0.3)
        result = ransac((w, x), 6,
                        lambda d: pnp_epnp(d[0], d[1]),
                        lambda m, d: reprojection_error(m, d[0], d[1]),
                        threshold=1e-4, seed=15, max_iters=500)
        assert np.linalg.norm(result.model.t - pose.t) < 1e-6
        assert rotation_angle(result.model.r, pose.r) < 1e-6

    def test_horn_in_ransac(self):
        rng = np.random.default_rng(16)
        from slamkit.transform import SIM3, SO3
        src = rng.normal(size=(200, 3))
        g = SIM3(SO3.exp([0.2, 0.4, -0.1]), [1.0, -2.0, 0.5], 1.7)
        dst = g.act(src)
        idx = rng.choice(200, size=60, replace=False)
        dst[idx] += rng.uniform(1.0, 2.0, size=(60, 3))
        result = ransac((src, dst), 3,
                        lambda d: sim3_horn(d[0], d[1]),
                        lambda m, d: point_distance(m, d[0], d[1]),
                        threshold=1e-6, seed=17)
        assert abs(result.model.s / g.s - 1.0) < 1e-9


def fundamental_8pt_refit(data):
    from slamkit.estimator import fundamental_8pt
    return fundamental_8pt(data[0], data[1])


class TestValidation:
    def test_bad_parameters(self):
        x1, x2, _, _ = homography_data(20, seed=18)
        with pytest.raises(ValueError):
            ransac((x1, x2), 4, hsolver, hresidual, threshold=-1.0)
        with pytest.raises(ValueError):
            ransac((x1, x2), 4, hsolver, hresidual, threshold=1e-3, confidence=1.5)
        with pytest.raises(ValueError):
            ransac((x1[:2], x2[:2]), 4, hsolver, hresidual, threshold=1e-3)
