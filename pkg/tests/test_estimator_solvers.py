import math

import numpy as np
import pytest

from slamkit.errors import DegeneracyError
from slamkit.estimator import (
    affine2d_3pt,
    affine3d_4pt,
    apply_homography,
    homography_4pt,
    p3p,
    plane_fit,
    pnp_epnp,
    rigid_align,
    sim3_horn,
)
from slamkit.transform import SE3, SIM3, SO3

from geometry_helpers import pnp_scene, rotation_angle


class TestHomography:
    def test_recover_known_homography(self):
        rng = np.random.default_rng(0)
        h_true = np.array([[1.1, 0.02, 0.3], [-0.05, 0.95, -0.2], [0.01, -0.02, 1.0]])
        x1 = rng.uniform(-1, 1, size=(4, 2))
        x2 = apply_homography(h_true, x1)
        h = homography_4pt(x1, x2)
        assert np.linalg.norm(h - h_true) / np.linalg.norm(h_true) < 1e-9

    def test_identity_mapping(self):
        x1 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, 0.6]])
        h = homography_4pt(x1, x1)
        np.testing.assert_allclose(h, np.eye(3), atol=1e-12)

    def test_collinear_sources_rejected(self):
        x1 = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 1.0]])
        x2 = x1 + 0.1
        with pytest.raises(DegeneracyError):
            homography_4pt(x1, x2)

    def test_overdetermined(self):
        rng = np.random.default_rng(1)
        h_true = np.array([[0.9, 0.1, -0.4], [0.0, 1.2, 0.5], [-0.03, 0.01, 1.0]])
        x1 = rng.uniform(-1, 1, size=(40, 2))
        x2 = apply_homography(h_true, x1)
        h = homography_4pt(x1, x2)
        assert np.linalg.norm(h - h_true) / np.linalg.norm(h_true) < 1e-9


class TestAffine2d:
    def test_recover_known_affine(self):
        rng = np.random.default_rng(2)
        a_true = np.array([[1.2, -0.3, 0.5], [0.4, 0.8, -1.0]])
        x1 = rng.uniform(-2, 2, size=(3, 2))
        x2 = x1 @ a_true[:, :2].T + a_true[:, 2]
        np.testing.assert_allclose(affine2d_3pt(x1, x2), a_true, atol=1e-10)

    def test_collinear_rejected(self):
        x1 = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DegeneracyError):
            affine2d_3pt(x1, x1)


class TestEpnp:
    def test_six_point_recovery(self):
        for seed in range(20):
            w, x, pose, _ = pnp_scene(6, seed=seed)
            est = pnp_epnp(w, x)
            assert np.linalg.norm(est.t - pose.t) < 1e-6
            assert rotation_angle(est.r, pose.r) < 1e-6
            p_c = est.act(w)
            reproj = p_c[:, :2] / p_c[:, 2:3]
            assert np.max(np.linalg.norm(reproj - x, axis=1)) < 1e-8

    def test_identity_pose(self):
        rng = np.random.default_rng(3)
        w = rng.uniform([-1, -1, 3], [1, 1, 6], size=(8, 3))
        x = w[:, :2] / w[:, 2:3]
        est = pnp_epnp(w, x)
        assert np.linalg.norm(est.t) < 1e-9
        assert rotation_angle(est.r, SO3.identity()) < 1e-9

    def test_coplanar_rejected(self):
        w, x, _, _ = pnp_scene(10, seed=4, coplanar=True)
        with pytest.raises(DegeneracyError):
            pnp_epnp(w, x)

    def test_minimum_count(self):
        w, x, _, _ = pnp_scene(6, seed=5)
        with pytest.raises(ValueError):
            pnp_epnp(w[:3], x[:3])


class TestP3p:
    def test_truth_among_candidates(self):
        for seed in range(30):
            w, x, pose, _ = pnp_scene(3, seed=seed)
            poses = p3p(w, x)
            assert 1 <= len(poses) <= 4
            errs = [np.linalg.norm(p.t - pose.t) + rotation_angle(p.r, pose.r)
                    for p in poses]
            assert min(errs) < 1e-6

    def test_fourth_point_disambiguates(self):
        w, x, pose, _ = pnp_scene(4, seed=100)
        poses = p3p(w[:3], x[:3])
        extra_w, extra_x = w[3], x[3]

        def reproj(p):
            pc = p.act(extra_w)
            if pc[2] <= 0:
                return np.inf
            return np.linalg.norm(pc[:2] / pc[2] - extra_x)

        best = min(poses, key=reproj)
        assert np.linalg.norm(best.t - pose.t) < 1e-6
        assert rotation_angle(best.r, pose.r) < 1e-6

    def test_collinear_rejected(self):
        w = np.array([[0.0, 0.0, 4.0], [0.5, 0.0, 4.0], [1.0, 0.0, 4.0]])
        x = w[:, :2] / w[:, 2:3]
        with pytest.raises(DegeneracyError):
            p3p(w, x)


class TestHorn:
    def test_recover_known_similarity(self):
        rng = np.random.default_rng(6)
        for seed in range(10):
            src = rng.normal(size=(10, 3))
            g = SIM3(SO3.exp(rng.normal(size=3)), rng.normal(size=3),
                     math.exp(rng.uniform(-1, 1)))
            dst = g.act(src)
            est = sim3_horn(src, dst)
            assert abs(est.s / g.s - 1.0) < 1e-9
            assert rotation_angle(est.r, g.r) < 1e-9
            assert np.linalg.norm(est.t - g.t) < 1e-9

    def test_identity_on_identical_sets(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(5, 3))
        est = sim3_horn(pts, pts)
        assert est.approx_equal(SIM3.identity(), 1e-12)

    def test_rigid_mode_fixes_scale(self):
        rng = np.random.default_rng(8)
        src = rng.normal(size=(6, 3))
        g = SIM3(SO3.exp([0.3, -0.2, 0.5]), [1.0, 2.0, 3.0], 2.0)
        est = sim3_horn(src, g.act(src), with_scale=False)
        assert est.s == 1.0
        est_rigid = rigid_align(src, SE3(g.r, g.t).act(src))
        assert rotation_angle(est_rigid.r, g.r) < 1e-9

    def test_collinear_rejected(self):
        src = np.outer(np.arange(5.0), [1.0, 2.0, -1.0])
        with pytest.raises(DegeneracyError):
            sim3_horn(src, src + 1.0)

    def test_reflection_is_repaired(self):
        # a near-planar cloud mapped by a proper rotation must not produce
        # a reflection even when the covariance is ill-conditioned
        rng = np.random.default_rng(9)
        src = rng.normal(size=(20, 3)) * [1.0, 1.0, 1e-6]
        g = SIM3(SO3.exp([0.0, np.pi * 0.9, 0.0]), [0.1, 0.2, 0.3], 1.0)
        est = sim3_horn(src, g.act(src))
        assert np.linalg.det(est.r.matrix()) > 0.999


class TestAffine3d:
    def test_recover_known_affine(self):
        rng = np.random.default_rng(10)
        a_true = np.hstack([rng.normal(size=(3, 3)) + np.eye(3), rng.normal(size=(3, 1))])
        src = rng.normal(size=(4, 3))
        dst = src @ a_true[:, :3].T + a_true[:, 3]
        np.testing.assert_allclose(affine3d_4pt(src, dst), a_true, atol=1e-9)

    def test_coplanar_rejected(self):
        src = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.0]])
        with pytest.raises(DegeneracyError):
            affine3d_4pt(src, src)


class TestPlaneFit:
    def test_z_plane(self):
        rng = np.random.default_rng(11)
        pts = np.column_stack([rng.normal(size=(20, 2)), np.zeros(20)])
        normal, offset = plane_fit(pts)
        np.testing.assert_allclose(normal, [0.0, 0.0, 1.0], atol=1e-12)
        assert abs(offset) < 1e-12

    def test_known_plane_with_positive_offset(self):
        rng = np.random.default_rng(12)
        n_true = np.array([1.0, 2.0, -2.0]) / 3.0
        d_true = 1.5
        basis = np.linalg.svd(n_true[None, :])[2][1:]
        pts = d_true * n_true + rng.normal(size=(30, 2)) @ basis
        normal, offset = plane_fit(pts)
        assert abs(offset - d_true) < 1e-9
        np.testing.assert_allclose(normal, n_true, atol=1e-9)

    def test_collinear_rejected(self):
        pts = np.outer(np.arange(5.0), [1.0, 0.0, 0.0])
        with pytest.raises(DegeneracyError):
            plane_fit(pts)
