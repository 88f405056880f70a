import itertools
import math

import numpy as np
import pytest

from slamkit.dataset import Trajectory
from slamkit.errors import DegeneracyError
from slamkit.evaluation import (
    AssociationError,
    ErrorStats,
    align,
    ape,
    associate,
    report,
    rpe,
)
from slamkit.transform import SE3, SIM3, SO3


def circle_trajectory(n=60, radius=3.0, seed=None):
    ts = np.arange(n) * 0.1
    poses = []
    for k in range(n):
        theta = 2 * math.pi * k / n
        rot = SO3.exp([0.0, 0.0, theta])
        poses.append(SE3(rot, [radius * math.cos(theta), radius * math.sin(theta),
                               0.1 * math.sin(3 * theta)]))
    return Trajectory(ts, poses)


def perturbed(traj, sigma, seed=0):
    rng = np.random.default_rng(seed)
    poses = [SE3(p.r, p.t + rng.normal(scale=sigma, size=3)) for p in traj.poses]
    return Trajectory(traj.timestamps.copy(), poses)


class TestErrorStats:
    def test_identity_rmse_mean_var(self):
        rng = np.random.default_rng(0)
        s = ErrorStats.from_samples(rng.uniform(0, 2, size=500))
        assert abs(s.rmse ** 2 - (s.mean ** 2 + s.std ** 2)) < 1e-9 * s.rmse ** 2
        assert s.min <= s.median <= s.max
        assert s.rmse >= s.mean  # nonnegative samples

    def test_empty_rejected(self):
        with pytest.raises(Exception):
            ErrorStats.from_samples([])


class TestAssociate:
    def test_identical_timestamps(self):
        a = circle_trajectory(20)
        pairs = associate(a, a, max_dt=0.0)
        assert pairs == [(i, i) for i in range(20)]

    def test_nearest_matching_case(self):
        gt = Trajectory([0.0, 1.0, 2.0], [SE3.identity()] * 3 and
                        [SE3(SO3.identity(), [k, 0, 0]) for k in range(3)])
        est = Trajectory([0.49, 1.51], [SE3.identity(),
                                        SE3(SO3.identity(), [1, 0, 0])])
        pairs = associate(est, gt, max_dt=0.5)
        assert pairs == [(0, 0), (1, 2)]

    def test_zero_max_dt_with_offset(self):
        gt = circle_trajectory(10)
        est = Trajectory(gt.timestamps + 0.01, gt.poses)
        with pytest.raises(AssociationError):
            associate(est, gt, max_dt=0.0)

    def test_matches_exhaustive_oracle_on_small_cases(self):
        # oracle: maximize match count, then minimize total |dt|, by brute
        # force over injective assignments
        def oracle(ta, tb, max_dt):
            best = (0, 0.0, [])
            n, m = len(ta), len(tb)
            for k in range(min(n, m), -1, -1):
                found = None
                for isub in itertools.combinations(range(n), k):
                    for jperm in itertools.permutations(range(m), k):
                        dts = [abs(ta[i] - tb[j]) for i, j in zip(isub, jperm)]
                        if all(d <= max_dt for d in dts):
                            cand = (k, -sum(dts), sorted(zip(isub, jperm)))
                            if found is None or cand[1] > found[1]:
                                found = cand
                if found:
                    return found[0], sorted(found[2])
            return 0, []

        rng = np.random.default_rng(1)
        exact_agreements = 0
        for _ in range(20):
            ta = np.sort(rng.uniform(0, 1, size=4))
            tb = np.sort(rng.uniform(0, 1, size=4))
            ta += np.arange(4) * 1e-6  # keep strictly increasing
            tb += np.arange(4) * 1e-6
            a = Trajectory(ta, [SE3.identity() for _ in ta])
            b = Trajectory(tb, [SE3.identity() for _ in tb])
            count, _ = oracle(list(ta), list(tb), 0.1)
            try:
                pairs = associate(a, b, max_dt=0.1)
            except AssociationError:
                assert count == 0
                continue
            # greedy is maximal: at least half the optimal count, each
            # index used once, all |dt| within bound
            assert len(pairs) >= (count + 1) // 2
            assert len({i for i, _ in pairs}) == len(pairs)
            assert len({j for _, j in pairs}) == len(pairs)
            for i, j in pairs:
                assert abs(ta[i] - tb[j]) <= 0.1
            exact_agreements += len(pairs) == count
        # divergence from the optimal count is the documented pathological
        # exception, not the rule
        assert exact_agreements >= 15


class TestAlign:
    def test_known_sim3_recovered(self):
        gt = circle_trajectory(40)
        g = SIM3(SO3.exp([0.2, -0.4, 0.8]), [2.0, -1.0, 3.0], 1.7)
        est_poses = []
        for p in gt.poses:
            m = g * SIM3.from_se3(p)
            est_poses.append(SE3(m.r, m.t))
        est = Trajectory(gt.timestamps.copy(), est_poses)
        rec = align(est, gt, mode="sim3")
        residual = np.max(np.linalg.norm(
            rec.act(est.positions()) - gt.positions(), axis=1))
        assert residual < 1e-9

    def test_identity_on_equal(self):
        gt = circle_trajectory(10)
        g = align(gt, gt, mode="sim3")
        assert g.approx_equal(SIM3.identity(), 1e-9)

    def test_collinear_sim3_degenerate(self):
        ts = np.arange(5) * 0.1
        poses = [SE3(SO3.identity(), [k * 1.0, 0, 0]) for k in range(5)]
        line = Trajectory(ts, poses)
        with pytest.raises(DegeneracyError):
            align(line, line, mode="sim3")


class TestApe:
    def test_equal_trajectories_zero(self):
        gt = circle_trajectory(30)
        res = ape(gt, gt)
        assert res.translation.rmse < 1e-12
        assert res.rotation.rmse < 1e-12
        assert res.translation.count == 30

    def test_global_shift_removed_by_alignment(self):
        gt = circle_trajectory(50)
        shift = SE3(SO3.exp([0.3, 0.1, -0.7]), [5.0, -2.0, 1.0])
        est = gt.transformed(shift)
        res = ape(est, gt, mode="se3", align_first=True)
        assert res.translation.rmse < 1e-9
        assert res.rotation.rmse < 1e-9
        res_noalign = ape(est, gt, mode="se3", align_first=False)
        assert res_noalign.translation.rmse > 1.0

    def test_gaussian_noise_rmse(self):
        n = 1000
        ts = np.arange(n) * 0.05
        rng = np.random.default_rng(3)
        poses = []
        for k in range(n):
            theta = 2 * math.pi * k / n
            poses.append(SE3(SO3.exp([0, 0, theta]),
                             [5 * math.cos(theta), 5 * math.sin(theta), 0.0]))
        gt = Trajectory(ts, poses)
        sigma = 0.01
        est = perturbed(gt, sigma, seed=4)
        res = ape(est, gt, mode="se3")
        expected = sigma * math.sqrt(3)
        assert abs(res.translation.rmse - expected) / expected < 0.15


class TestRpe:
    def test_invariant_under_global_transform(self):
        gt = circle_trajectory(40)
        g = SE3(SO3.exp([0.5, -0.3, 0.2]), [10.0, 5.0, -2.0])
        est = gt.transformed(g)
        res = rpe(est, gt, delta=1)
        assert res.translation.max < 1e-12
        assert res.rotation.max < 1e-12

    def test_constant_drift_mean(self):
        n = 50
        d = np.array([0.02, -0.01, 0.005])
        ts = np.arange(n) * 0.1
        gt_poses = [SE3(SO3.identity(), [k * 0.5, 0, 0]) for k in range(n)]
        est_poses = [SE3(SO3.identity(), p.t + k * d)
                     for k, p in enumerate(gt_poses)]
        gt = Trajectory(ts, gt_poses)
        est = Trajectory(ts, est_poses)
        for delta in (1, 3, 7):
            res = rpe(est, gt, delta=delta)
            assert abs(res.translation.mean - delta * np.linalg.norm(d)) < 1e-9

    def test_delta_longer_than_trajectory(self):
        gt = circle_trajectory(5)
        with pytest.raises(Exception):
            rpe(gt, gt, delta=10)

    def test_delta_in_seconds(self):
        gt = circle_trajectory(40)
        res = rpe(gt, gt, delta=0.5, delta_unit="seconds")
        assert res.translation.max < 1e-12
        assert res.delta_unit == "seconds"


class TestReport:
    def test_single_run_block(self, tmp_path):
        gt = circle_trajectory(20)
        res = ape(perturbed(gt, 0.01), gt)
        paths = report({"run": res}, str(tmp_path / "out"))
        lines = open(paths["stats"]).read().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 3  # translation + rotation rows
        fields = lines[1].split("\t")
        assert len(fields) == 10

    def test_two_runs_sorted_by_rmse(self, tmp_path):
        gt = circle_trajectory(20)
        noisy = ape(perturbed(gt, 0.05, seed=1), gt)
        clean = ape(perturbed(gt, 0.001, seed=2), gt)
        paths = report({"noisy": noisy, "clean": clean}, str(tmp_path / "out"))
        body = [l for l in open(paths["stats"]).read().splitlines()
                if not l.startswith("#")]
        assert body[0].split("\t")[0] == "clean"
        assert body[2].split("\t")[0] == "noisy"

    def test_stats_consistent_with_emitted_errors(self, tmp_path):
        gt = circle_trajectory(25)
        res = ape(perturbed(gt, 0.02, seed=5), gt)
        paths = report({"r": res}, str(tmp_path / "out"))
        rows = [l.split("\t") for l in open(paths["r_errors"]).read().splitlines()
                if not l.startswith("#")]
        terr = np.array([float(r[1]) for r in rows])
        stats = ErrorStats.from_samples(terr)
        assert abs(stats.rmse - res.translation.rmse) < 1e-9
        assert abs(stats.mean - res.translation.mean) < 1e-9
        assert abs(stats.max - res.translation.max) < 1e-9
