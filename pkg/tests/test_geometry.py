import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.geometry.cloud import PointCloud
from src.geometry.transforms import (
    Pose6, RigidTransform, apply, compose, invert, pose_to_transform, rot_y, rot_z,
    rotation_angle, transform_points, transform_to_pose, wrap_angle,
)
from src.simulator.specs import SETTINGS


def random_transform(rng, random_rotation):
    return RigidTransform(random_rotation(rng), rng.uniform(-2, 2, size=3))


class TestPoseToTransform:
    def test_zero_pose_is_identity(self):
        t = pose_to_transform(Pose6())
        np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(t.translation, np.zeros(3), atol=1e-15)

    def test_quarter_yaw_maps_x_to_y(self):
        t = pose_to_transform(Pose6(psi=np.pi / 2))
        np.testing.assert_allclose(apply(t, [1, 0, 0]), [0, 1, 0], atol=1e-12)

    def test_composition_order_is_roll_pitch_yaw(self):
        pose = Pose6(phi=0.2, theta=0.1, psi=0.3)
        expected = (Rotation.from_euler("z", 0.3) * Rotation.from_euler("y", 0.1)
                    * Rotation.from_euler("x", 0.2)).as_matrix()
        np.testing.assert_allclose(pose_to_transform(pose).rotation, expected, atol=1e-12)

    @pytest.mark.parametrize("setting_id", sorted(SETTINGS))
    def test_settings_round_trip(self, setting_id):
        pose = SETTINGS[setting_id]
        back = transform_to_pose(pose_to_transform(pose))
        np.testing.assert_allclose(back.as_array(), pose.as_array(), atol=1e-9)

    def test_non_finite_pose_rejected(self):
        with pytest.raises(ValueError):
            Pose6(t_x=np.nan)


class TestTransformToPose:
    def test_identity(self):
        assert transform_to_pose(RigidTransform.identity()) == Pose6()

    def test_random_poses_round_trip(self, rng):
        for _ in range(200):
            pose = Pose6(*rng.uniform(-3, 3, size=3),
                         rng.uniform(-np.pi + 1e-6, np.pi),
                         rng.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3),
                         rng.uniform(-np.pi + 1e-6, np.pi))
            back = transform_to_pose(pose_to_transform(pose))
            np.testing.assert_allclose(back.as_array(), pose.as_array(), atol=1e-9)

    def test_random_rotations_recompose(self, rng, random_rotation):
        for _ in range(200):
            transform = random_transform(rng, random_rotation)
            recomposed = pose_to_transform(transform_to_pose(transform))
            np.testing.assert_allclose(recomposed.rotation, transform.rotation, atol=1e-9)
            np.testing.assert_allclose(recomposed.translation, transform.translation, atol=1e-12)

    def test_gimbal_lock_puts_roll_into_yaw(self):
        locked = pose_to_transform(Pose6(phi=0.3, theta=np.pi / 2, psi=0.2))
        pose = transform_to_pose(locked)
        assert pose.phi == 0.0
        assert pose.theta == pytest.approx(np.pi / 2)
        np.testing.assert_allclose(pose_to_transform(pose).rotation, locked.rotation, atol=1e-9)


class TestApplyComposeInvert:
    def test_apply_examples(self):
        assert np.allclose(apply(RigidTransform.identity(), [1, 2, 3]), [1, 2, 3])
        shift = RigidTransform(np.eye(3), [0.1, 0.2, 0.3])
        assert np.allclose(apply(shift, [0, 0, 0]), [0.1, 0.2, 0.3])
        yaw = pose_to_transform(Pose6(psi=np.pi / 2))
        assert np.allclose(apply(yaw, [1, 0, 0]), [0, 1, 0])

    def test_apply_preserves_distances(self, rng, random_rotation):
        for _ in range(100):
            t = random_transform(rng, random_rotation)
            p, q = rng.normal(size=(2, 3))
            assert abs(np.linalg.norm(apply(t, p) - apply(t, q)) - np.linalg.norm(p - q)) < 1e-9

    def test_transform_points_matches_apply(self, rng, random_rotation):
        t = random_transform(rng, random_rotation)
        points = rng.normal(size=(50, 3))
        expected = np.array([apply(t, p) for p in points])
        np.testing.assert_allclose(transform_points(t, points), expected, atol=1e-12)

    def test_compose_with_identity(self, rng, random_rotation):
        b = random_transform(rng, random_rotation)
        result = compose(RigidTransform.identity(), b)
        np.testing.assert_allclose(result.as_matrix(), b.as_matrix(), atol=1e-15)

    def test_compose_with_inverse_is_identity(self, rng, random_rotation):
        b = random_transform(rng, random_rotation)
        np.testing.assert_allclose(compose(invert(b), b).as_matrix(), np.eye(4), atol=1e-9)
        np.testing.assert_allclose(compose(b, invert(b)).as_matrix(), np.eye(4), atol=1e-9)

    def test_compose_pointwise(self, rng, random_rotation):
        a, b = random_transform(rng, random_rotation), random_transform(rng, random_rotation)
        points = rng.normal(size=(100, 3))
        np.testing.assert_allclose(transform_points(compose(a, b), points),
                                   transform_points(a, transform_points(b, points)), atol=1e-9)

    def test_compose_is_associative(self, rng, random_rotation):
        for _ in range(100):
            a, b, c = (random_transform(rng, random_rotation) for _ in range(3))
            left = compose(compose(a, b), c).as_matrix()
            right = compose(a, compose(b, c)).as_matrix()
            np.testing.assert_allclose(left, right, atol=1e-9)

    def test_invert_translation(self):
        inverse = invert(RigidTransform(np.eye(3), [0.1, -0.2, 0.3]))
        np.testing.assert_allclose(inverse.translation, [-0.1, 0.2, -0.3])
        assert invert(RigidTransform.identity()).is_valid()

    def test_invert_setting_nine(self):
        t = pose_to_transform(SETTINGS[9])
        np.testing.assert_allclose(compose(t, invert(t)).as_matrix(), np.eye(4), atol=1e-9)

    def test_matrix_form(self, rng, random_rotation):
        t = random_transform(rng, random_rotation)
        m = t.as_matrix()
        assert m.shape == (4, 4)
        np.testing.assert_array_equal(m[3], [0, 0, 0, 1])
        back = RigidTransform.from_matrix(m)
        np.testing.assert_allclose(back.rotation, t.rotation)
        assert back.is_valid()

    def test_transform_is_immutable(self):
        t = RigidTransform.identity()
        with pytest.raises(ValueError):
            t.rotation[0, 0] = 2.0


class TestRotationAngle:
    def test_examples(self):
        assert rotation_angle(np.eye(3)) == 0.0
        assert rotation_angle(rot_z(0.5)) == pytest.approx(0.5, abs=1e-12)
        assert rotation_angle(rot_z(np.pi)) == pytest.approx(np.pi, abs=1e-12)

    def test_matches_quaternion_oracle(self):
        r = rot_y(0.1) @ rot_z(0.3)
        assert rotation_angle(r) == pytest.approx(Rotation.from_matrix(r).magnitude(), abs=1e-9)

    def test_symmetric_under_transpose(self, rng, random_rotation):
        for _ in range(100):
            r = random_rotation(rng)
            assert rotation_angle(r) == pytest.approx(rotation_angle(r.T), abs=1e-12)
            assert 0.0 <= rotation_angle(r) <= np.pi

    def test_small_angles_keep_precision(self):
        assert rotation_angle(rot_z(1e-8)) == pytest.approx(1e-8, rel=1e-6)


def test_wrap_angle():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(1.5 * np.pi) == pytest.approx(-0.5 * np.pi)


class TestPointCloud:
    def test_attribute_length_mismatch(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((3, 3)), intensity=[1, 2])

    def test_subset_keeps_attributes(self):
        cloud = PointCloud(np.arange(12.0).reshape(4, 3), rings=[0, 1, 2, 3], pixels=[10, 11, 12, 13])
        part = cloud.subset(np.array([True, False, True, False]))
        np.testing.assert_array_equal(part.rings, [0, 2])
        np.testing.assert_array_equal(part.pixels, [10, 12])
        assert part.intensity is None
        assert len(part) == 2
