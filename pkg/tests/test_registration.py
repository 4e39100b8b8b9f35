import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.errors import (
    CalibrationError, ConfigurationError, DegenerateConfiguration, GeometryMismatch, InsufficientDetections,
)
from src.geometry.transforms import (
    Pose6, RigidTransform, invert, pose_to_transform, rot_z, rotation_angle, transform_points,
)
from src.registration.alignment import best_rigid_fit, icp_refine, translation_ls
from src.registration.calibrator import CalibrationResult, ExtrinsicCalibrator, calibrate, register
from src.simulator.scene import load_setting
from src.simulator.sensors import simulate_frames
from src.simulator.specs import SETTINGS
from src.target_detection.reference_points import ReferencePoints


def board_points(target, distance=2.5):
    """Hole centers on the plane x = distance, tl, tr, bl, br order"""
    uv = target.hole_centers()
    return np.column_stack([np.full(4, distance), -uv[:, 0], uv[:, 1]])


def rms(a, b):
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


class TestTranslationLs:
    def test_pure_offset(self, target):
        camera = board_points(target)
        lidar = camera + [0.1, -0.2, 0.3]
        t = translation_ls(ReferencePoints.from_array(camera), ReferencePoints.from_array(lidar))
        np.testing.assert_allclose(t, [0.1, -0.2, 0.3], atol=1e-12)

    def test_identical_sets(self, target):
        points = ReferencePoints.from_array(board_points(target))
        np.testing.assert_allclose(translation_ls(points, points), np.zeros(3), atol=1e-15)

    def test_equals_mean_of_differences(self, rng):
        for _ in range(1000):
            camera, lidar = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
            t = translation_ls(ReferencePoints.from_array(camera), ReferencePoints.from_array(lidar))
            np.testing.assert_allclose(t, (lidar - camera).mean(axis=0), atol=1e-12)


class TestIcp:
    def test_aligned_sets_give_identity(self, target):
        points = board_points(target)
        correction = icp_refine(points, points)
        np.testing.assert_allclose(correction.as_matrix(), np.eye(4), atol=1e-9)

    def test_recovers_yaw(self, target):
        lidar = board_points(target)
        camera = lidar @ rot_z(0.1).T
        correction = icp_refine(camera, lidar)
        np.testing.assert_allclose(transform_points(correction, camera), lidar, atol=1e-9)
        assert rotation_angle(correction.rotation) == pytest.approx(0.1, abs=1e-9)

    def test_matches_procrustes_oracle(self, rng, random_rotation):
        for _ in range(100):
            source = rng.normal(size=(4, 3))
            target = source @ random_rotation(rng).T + rng.uniform(-1, 1, 3) + rng.normal(0, 0.01, (4, 3))
            correction = icp_refine(source, target)
            oracle, _ = Rotation.align_vectors(target - target.mean(axis=0), source - source.mean(axis=0))
            np.testing.assert_allclose(correction.rotation, oracle.as_matrix(), atol=1e-6)

    def test_rms_does_not_increase(self, rng, random_rotation):
        for _ in range(100):
            source = rng.normal(size=(4, 3))
            target = source @ random_rotation(rng).T + rng.normal(0, 0.05, (4, 3))
            correction = icp_refine(source, target)
            assert rms(transform_points(correction, source), target) <= rms(source, target) + 1e-12

    def test_nearest_association_near_alignment(self, target):
        lidar = board_points(target)
        camera = lidar @ rot_z(0.02).T + [0.0, 0.01, 0.0]
        correction = icp_refine(camera, lidar, association="nearest")
        np.testing.assert_allclose(transform_points(correction, camera), lidar, atol=1e-9)

    def test_collinear_points_are_degenerate(self, rng):
        line = np.outer(np.arange(4.0), [1.0, 0.5, 0.0])
        with pytest.raises(DegenerateConfiguration):
            icp_refine(line, rng.normal(size=(4, 3)))

    def test_unknown_association(self, target):
        with pytest.raises(ConfigurationError):
            icp_refine(board_points(target), board_points(target), association="hungarian")

    def test_rigid_fit_has_no_reflection(self, rng):
        source = rng.normal(size=(4, 3))
        mirrored = source * [1.0, 1.0, -1.0]
        fit = best_rigid_fit(source, mirrored)
        assert np.linalg.det(fit.rotation) == pytest.approx(1.0)


class TestRegister:
    @pytest.mark.parametrize("setting_id", [1, 3, 9])
    def test_exact_recovery(self, target, setting_id):
        truth = pose_to_transform(SETTINGS[setting_id])
        camera = board_points(target)
        lidar = transform_points(truth, camera)
        estimate = register(ReferencePoints.from_array(camera), ReferencePoints.from_array(lidar))
        np.testing.assert_allclose(estimate.as_matrix(), truth.as_matrix(), atol=1e-9)

    def test_degenerate_input_is_tagged(self):
        camera = ReferencePoints.from_array(np.outer(np.arange(1.0, 5.0), [1.0, 0.0, 0.0]))
        lidar = ReferencePoints.from_array(np.outer(np.arange(1.0, 5.0), [0.0, 1.0, 0.0]))
        with pytest.raises(CalibrationError) as info:
            register(camera, lidar)
        assert info.value.stage == "registration.icp"


class TestCalibrate:
    def test_identity_setting(self, config, setting7_frames):
        result = calibrate(*setting7_frames, config)
        assert np.linalg.norm(result.pose.translation) <= 0.02
        assert rotation_angle(result.transform.rotation) <= 0.02
        assert result.frames_used == 3
        assert result.frames_total == 3
        assert result.rms_residual >= 0

    def test_parallel_workers_match_serial(self, config, setting7_frames):
        serial = ExtrinsicCalibrator(config).calibrate(*setting7_frames)
        config["registration"]["workers"] = 2
        parallel = ExtrinsicCalibrator(config).calibrate(*setting7_frames)
        np.testing.assert_array_equal(parallel.pose.as_array(), serial.pose.as_array())

    def test_no_camera_frames(self, config, setting7_frames):
        with pytest.raises(InsufficientDetections) as info:
            calibrate(setting7_frames[0], [], config)
        assert info.value.stage == "camera"

    def test_no_lidar_frames(self, config, setting7_frames):
        with pytest.raises(InsufficientDetections) as info:
            calibrate([], setting7_frames[1], config)
        assert info.value.stage == "lidar"

    def test_yawed_setting_maps_camera_centers_onto_lidar_centers(self, config, vlp16, small_camera):
        setting = load_setting(2, vlp16, small_camera)
        frames = simulate_frames(setting, vlp16, small_camera, 2, noise_factor=0.0, seed=0)
        result = calibrate(*frames, config)

        lidar_centers = setting.scene.hole_centers()
        camera_centers = transform_points(invert(setting.transform), lidar_centers)
        moved = transform_points(result.transform, camera_centers)
        assert np.max(np.linalg.norm(moved - lidar_centers, axis=1)) <= 0.01


class TestLayoutCheck:
    @pytest.mark.parametrize("shift, accepted", [(0.02, True), (0.045, False)])
    def test_reference_points_match_hole_layout(self, config, target, shift, accepted):
        centers = board_points(target)
        centers[0, 2] += shift
        calibrator = ExtrinsicCalibrator(config)
        if accepted:
            labeled = calibrator.reference_points("lidar", [centers] * 3)
            np.testing.assert_allclose(labeled.as_array(), centers, atol=1e-9)
            return
        with pytest.raises(GeometryMismatch) as info:
            calibrator.reference_points("lidar", [centers] * 3)
        assert info.value.stage == "lidar.label"


class TestCalibrationResult:
    def test_serialized_form_round_trips(self):
        pose = Pose6(t_x=-0.4, t_y=0.8, t_z=1.1, phi=0.07, theta=0.26, psi=-0.67)
        result = CalibrationResult(pose, pose_to_transform(pose), 0.003, 30, 28, 30)
        data = json.loads(result.to_json())
        assert data["direction"] == "camera_to_lidar"
        assert data["frames_used"] == 28
        back = CalibrationResult.from_dict(data)
        np.testing.assert_allclose(back.pose.as_array(), pose.as_array())
        np.testing.assert_allclose(back.transform.as_matrix(), result.transform.as_matrix())
        assert (back.lidar_frames_used, back.camera_frames_used, back.frames_total) == (30, 28, 30)

    def test_transform_is_rigid(self):
        result = CalibrationResult(Pose6(), RigidTransform.identity(), 0.0, 1, 1, 1)
        assert result.transform.is_valid()
