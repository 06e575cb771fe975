"""Lie-group primitive tests.

Derived expectations are frozen from independent oracles: scipy's Rotation
for Rodrigues values, hand matrix products for compositions, and direct
formula evaluation for distances.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from etseed import se3
from etseed.errors import BadParameter, CovarianceNotPSD, NearPiRotation
from etseed.se3 import (
    IDENTITY,
    SE3Gaussian,
    SE3Pose,
    Twist,
    adjoint,
    compose,
    exp_map,
    geodesic_distance,
    interpolate,
    inverse,
    log_map,
    rotation_about_z,
    sample_gaussian,
)

# Oracle: Rodrigues for a 90-degree turn about z, computed by hand
# (cos=0, sin=1) and cross-checked against scipy in test_exp_matches_scipy.
RZ90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
RZ180 = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])


def random_pose(rng, max_angle=np.pi - 0.2, scale=1.0):
    w = rng.normal(size=3)
    w *= rng.uniform(0.0, max_angle) / np.linalg.norm(w)
    R = Rotation.from_rotvec(w).as_matrix()
    return SE3Pose(R, rng.normal(scale=scale, size=3))


class TestExpMap:
    def test_zero_twist_is_identity(self, kernel_backend):
        p = exp_map(Twist.zero())
        assert np.array_equal(p.rotation, np.eye(3))
        assert np.array_equal(p.translation, np.zeros(3))

    def test_quarter_turn_about_z(self, kernel_backend):
        p = exp_map(Twist(np.zeros(3), np.array([0.0, 0.0, np.pi / 2])))
        np.testing.assert_allclose(p.rotation, RZ90, atol=1e-12)
        np.testing.assert_allclose(p.translation, np.zeros(3), atol=1e-15)

    def test_pure_translation(self, kernel_backend):
        p = exp_map(Twist(np.array([1.0, 0.0, 0.0]), np.zeros(3)))
        np.testing.assert_allclose(p.rotation, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(p.translation, [1.0, 0.0, 0.0], atol=1e-15)

    def test_exp_matches_scipy(self, kernel_backend, rng):
        for _ in range(200):
            w = rng.normal(size=3)
            p = exp_map(Twist(np.zeros(3), w))
            np.testing.assert_allclose(
                p.rotation, Rotation.from_rotvec(w).as_matrix(), atol=1e-13
            )


class TestLogMap:
    def test_identity_gives_zero(self, kernel_backend):
        tw = log_map(IDENTITY)
        assert np.array_equal(tw.as_vector(), np.zeros(6))

    def test_roundtrip_specific_twist(self, kernel_backend):
        tw = Twist(np.array([0.3, -0.1, 0.2]), np.array([0.1, 0.2, 0.3]))
        back = log_map(exp_map(tw))
        np.testing.assert_allclose(back.as_vector(), tw.as_vector(), atol=1e-12)

    def test_quarter_turn_inverse(self, kernel_backend):
        tw = log_map(SE3Pose(RZ90, np.zeros(3)))
        np.testing.assert_allclose(tw.omega, [0.0, 0.0, np.pi / 2], atol=1e-12)
        np.testing.assert_allclose(tw.u, np.zeros(3), atol=1e-12)

    def test_near_pi_raises_without_fallback(self, kernel_backend):
        R = Rotation.from_rotvec([np.pi - 1e-9, 0.0, 0.0]).as_matrix()
        with pytest.raises(NearPiRotation):
            log_map(SE3Pose(R, np.zeros(3)))

    def test_pi_fallback_is_deterministic_and_consistent(self, kernel_backend):
        for axis in ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.577, 0.577, 0.578]):
            a = np.asarray(axis) / np.linalg.norm(axis)
            R = Rotation.from_rotvec(np.pi * a).as_matrix()
            pose = SE3Pose(R, np.array([0.1, 0.2, 0.3]))
            tw1 = log_map(pose, fallback=True)
            tw2 = log_map(pose, fallback=True)
            assert np.array_equal(tw1.as_vector(), tw2.as_vector())
            assert abs(np.linalg.norm(tw1.omega) - np.pi) < 1e-9
            # sign rule: component at the largest diagonal entry is >= 0
            j = int(np.argmax(np.diag(R)))
            assert tw1.omega[j] >= 0.0
            recon = exp_map(tw1)
            np.testing.assert_allclose(recon.rotation, R, atol=1e-9)
            np.testing.assert_allclose(recon.translation, pose.translation, atol=1e-9)

    def test_roundtrip_sweep(self, kernel_backend, rng):
        tw = rng.normal(size=(20000, 6))
        norms = np.linalg.norm(tw[:, 3:], axis=1, keepdims=True)
        tw[:, 3:] *= np.minimum(1.0, (np.pi - 1e-3) / norms)
        from etseed import backend

        R, t = backend.active().exp_se3(tw)
        back = backend.active().log_se3(R, t)
        assert np.max(np.abs(back - tw)) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6))
    def test_roundtrip_property(self, vec):
        tw = np.asarray(vec)
        n = np.linalg.norm(tw[3:])
        if n > np.pi - 1e-3:
            tw[3:] *= (np.pi - 1e-3) / n
        back = log_map(exp_map(Twist.from_vector(tw)))
        assert np.max(np.abs(back.as_vector() - tw)) < 1e-9


class TestComposeInverse:
    def test_identity_is_neutral(self, kernel_backend, rng):
        b = random_pose(rng)
        out = compose(IDENTITY, b)
        np.testing.assert_allclose(out.rotation, b.rotation, atol=1e-15)
        np.testing.assert_allclose(out.translation, b.translation, atol=1e-15)

    def test_inverse_of_translation(self, kernel_backend):
        p = SE3Pose(np.eye(3), np.array([1.0, 2.0, 3.0]))
        q = inverse(p)
        np.testing.assert_allclose(q.translation, [-1.0, -2.0, -3.0], atol=1e-15)
        np.testing.assert_allclose(q.rotation, np.eye(3), atol=1e-15)

    def test_two_quarter_turns_make_half_turn(self, kernel_backend):
        # Oracle: matrix product of the frozen RZ90 with itself.
        out = compose(SE3Pose(RZ90, np.zeros(3)), SE3Pose(RZ90, np.zeros(3)))
        np.testing.assert_allclose(out.rotation, RZ180, atol=1e-12)

    def test_compose_with_inverse_is_identity(self, kernel_backend, rng):
        for _ in range(50):
            a = random_pose(rng)
            out = compose(a, inverse(a))
            assert np.max(np.abs(out.rotation - np.eye(3))) < 1e-12
            assert np.max(np.abs(out.translation)) < 1e-12

    def test_associativity(self, kernel_backend, rng):
        for _ in range(50):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert np.max(np.abs(left.rotation - right.rotation)) < 1e-12
            assert np.max(np.abs(left.translation - right.translation)) < 1e-12


class TestAdjoint:
    def test_identity(self, kernel_backend):
        np.testing.assert_allclose(adjoint(IDENTITY), np.eye(6), atol=1e-15)

    def test_pure_rotation_is_block_diagonal(self, kernel_backend):
        p = SE3Pose(RZ90, np.zeros(3))
        adj = adjoint(p)
        np.testing.assert_allclose(adj[:3, :3], RZ90, atol=1e-15)
        np.testing.assert_allclose(adj[3:, 3:], RZ90, atol=1e-15)
        np.testing.assert_allclose(adj[:3, 3:], np.zeros((3, 3)), atol=1e-15)

    def test_defining_identity(self, kernel_backend, rng):
        # a * exp(d) == exp(Adj_a d) * a, checked by direct evaluation
        for _ in range(50):
            a = random_pose(rng)
            d = Twist.from_vector(rng.normal(scale=0.5, size=6))
            left = compose(a, exp_map(d))
            moved = Twist.from_vector(adjoint(a) @ d.as_vector())
            right = compose(exp_map(moved), a)
            assert np.max(np.abs(left.rotation - right.rotation)) < 1e-8
            assert np.max(np.abs(left.translation - right.translation)) < 1e-8


class TestInterpolate:
    def test_endpoints_exact(self, kernel_backend, rng):
        a = random_pose(rng)
        one = interpolate(1.0, a, IDENTITY)
        np.testing.assert_allclose(one.rotation, a.rotation, atol=1e-12)
        np.testing.assert_allclose(one.translation, a.translation, atol=1e-12)
        zero = interpolate(0.0, a, IDENTITY)
        np.testing.assert_allclose(zero.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(zero.translation, np.zeros(3), atol=1e-12)

    def test_midpoint_of_quarter_turn(self, kernel_backend):
        # Oracle: tangent-space midpoint of Rz(90deg) toward identity is Rz(45deg).
        mid = interpolate(0.5, rotation_about_z(np.pi / 2), IDENTITY)
        np.testing.assert_allclose(
            mid.rotation, rotation_about_z(np.pi / 4).rotation, atol=1e-12
        )

    def test_tau_out_of_range(self, kernel_backend):
        with pytest.raises(BadParameter):
            interpolate(1.5, IDENTITY, IDENTITY)

    def test_near_pi_relative_rotation_raises(self, kernel_backend):
        a = exp_map(Twist(np.zeros(3), np.array([np.pi - 1e-9, 0.0, 0.0])))
        with pytest.raises(NearPiRotation):
            interpolate(0.5, a, IDENTITY)


class TestGeodesicDistance:
    def test_zero_on_equal_poses(self, kernel_backend, rng):
        a = random_pose(rng)
        assert geodesic_distance(a, a) == 0.0

    def test_frozen_example(self, kernel_backend):
        # Oracle: direct formula sqrt((pi/2)^2 + 3^2 + 4^2).
        b = SE3Pose(RZ90, np.array([3.0, 4.0, 0.0]))
        expected = np.sqrt((np.pi / 2) ** 2 + 25.0)
        assert abs(geodesic_distance(IDENTITY, b) - expected) < 1e-12

    def test_pure_translation(self, kernel_backend):
        b = SE3Pose(np.eye(3), np.array([0.0, 0.0, 2.0]))
        assert abs(geodesic_distance(IDENTITY, b) - 2.0) < 1e-15

    def test_symmetry(self, kernel_backend, rng):
        a, b = random_pose(rng), random_pose(rng)
        assert abs(geodesic_distance(a, b) - geodesic_distance(b, a)) < 1e-12

    def test_left_invariance(self, kernel_backend, rng):
        for _ in range(50):
            a, b, g = random_pose(rng), random_pose(rng), random_pose(rng)
            d0 = geodesic_distance(a, b)
            d1 = geodesic_distance(compose(g, a), compose(g, b))
            assert abs(d0 - d1) < 1e-9


class TestSampleGaussian:
    def test_zero_covariance_returns_mean(self, kernel_backend, rng):
        mean = random_pose(rng)
        g = SE3Gaussian(mean, np.zeros((6, 6)))
        out = sample_gaussian(g, np.random.default_rng(0))
        np.testing.assert_allclose(out.rotation, mean.rotation, atol=1e-15)
        np.testing.assert_allclose(out.translation, mean.translation, atol=1e-15)

    def test_monte_carlo_mean(self, kernel_backend):
        g = SE3Gaussian(IDENTITY, np.eye(6))
        r = np.random.default_rng(7)
        logs = np.empty((10_000, 6))
        for i in range(10_000):
            logs[i] = log_map(sample_gaussian(g, r), fallback=True).as_vector()
        assert np.max(np.abs(logs.mean(axis=0))) < 0.05

    def test_fixed_seed_is_bit_identical(self, kernel_backend):
        g = SE3Gaussian(IDENTITY, 0.3 * np.eye(6))
        a = sample_gaussian(g, np.random.default_rng(42))
        b = sample_gaussian(g, np.random.default_rng(42))
        assert np.array_equal(a.rotation, b.rotation)
        assert np.array_equal(a.translation, b.translation)

    def test_not_psd_rejected(self, kernel_backend):
        cov = np.eye(6)
        cov[0, 0] = -1.0
        with pytest.raises(CovarianceNotPSD):
            SE3Gaussian(IDENTITY, cov)


class TestPoseValidation:
    def test_reorthonormalizes_drift(self):
        R = RZ90 + 1e-5 * np.ones((3, 3))
        p = SE3Pose(R, np.zeros(3))
        assert np.max(np.abs(p.rotation.T @ p.rotation - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(p.rotation) - 1.0) < 1e-9

    def test_rejects_left_handed(self):
        with pytest.raises(BadParameter):
            SE3Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_rejects_nonfinite(self):
        with pytest.raises(BadParameter):
            SE3Pose(np.eye(3), np.array([np.nan, 0.0, 0.0]))


class TestSerialization:
    def test_pose_roundtrip_row_major(self, rng):
        p = random_pose(rng)
        flat = p.to_floats()
        assert len(flat) == 16
        # row-major: entry 3 is t_x, entry 7 is t_y, entry 11 is t_z
        assert flat[3] == p.translation[0]
        assert flat[7] == p.translation[1]
        assert flat[11] == p.translation[2]
        assert flat[12:] == [0.0, 0.0, 0.0, 1.0]
        q = SE3Pose.from_floats(flat)
        assert np.array_equal(q.rotation, p.rotation)
        assert np.array_equal(q.translation, p.translation)

    def test_twist_vector_layout(self):
        tw = Twist(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
        assert np.array_equal(tw.as_vector(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
