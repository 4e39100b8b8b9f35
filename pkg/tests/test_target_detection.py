import numpy as np
import pytest

from src.errors import (
    AmbiguousLabeling, CalibrationError, ClusterCountMismatch, ConfigurationError, DegenerateBasis,
    GeometryMismatch, InsufficientDetections, NotEnoughCircles,
)
from src.geometry.transforms import rot_z
from src.lidar_pipeline.lidar_segmenter import LidarSegmenter
from src.robust_fit.models import PlaneModel, RansacConfig
from src.target_detection.circle_detector import CircleDetector, CircleSearchConfig, find_four_circles
from src.target_detection.plane_space import lift_centers, plane_basis, plane_project
from src.target_detection.reference_points import ReferencePoints, accumulate_and_cluster, label_corners
from src.target_detection.target_model import TargetModel

# board facing the sensor at x = 2.5; plane-space u is -y
BOARD_PLANE = PlaneModel([-1.0, 0.0, 0.0], 2.5)


def board_point(u, v):
    return np.array([2.5, -u, v])


def hole_rims(target, per_hole=24, centers=None):
    centers = target.hole_centers() if centers is None else centers
    angles = np.linspace(0, 2 * np.pi, per_hole, endpoint=False)
    circle = target.hole_r * np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([c + circle for c in centers])


def exact_search():
    return CircleSearchConfig(RansacConfig(0.005, min_inliers=10))


def truth_3d(target):
    return np.array([board_point(u, v) for u, v in target.hole_centers()])


class TestTargetModel:
    def test_expected_distances(self, target):
        distances = target.expected_distances()
        assert len(distances) == 6
        np.testing.assert_allclose(distances, np.sort([0.4, 0.4, 0.5, 0.5, np.hypot(0.5, 0.4), np.hypot(0.5, 0.4)]))

    def test_invalid_layouts(self):
        with pytest.raises(ConfigurationError):
            TargetModel(sep_w=1.1)
        with pytest.raises(ConfigurationError):
            TargetModel(sep_h=0.2)
        with pytest.raises(ConfigurationError):
            TargetModel(hole_r=-0.1)

    def test_from_config(self):
        assert TargetModel.from_config({"hole_r": 0.1}) == TargetModel(hole_r=0.1)
        assert TargetModel.from_config(None) == TargetModel()


class TestPlaneSpace:
    def test_basis_is_right_handed_orthonormal(self, rng):
        for _ in range(100):
            azimuth, tilt = rng.uniform(-np.pi, np.pi), rng.uniform(-0.5, 0.5)
            normal = np.array([np.cos(tilt) * np.cos(azimuth), np.cos(tilt) * np.sin(azimuth), np.sin(tilt)])
            basis = plane_basis(PlaneModel(normal, rng.uniform(-3, 3)))
            frame = np.column_stack([basis.u, basis.v, basis.normal])
            np.testing.assert_allclose(frame.T @ frame, np.eye(3), atol=1e-9)
            assert np.linalg.det(frame) == pytest.approx(1.0, abs=1e-9)
            assert basis.v[2] > 0

    def test_u_points_to_the_viewers_right(self):
        basis = plane_basis(BOARD_PLANE)
        np.testing.assert_allclose(basis.u, [0, -1, 0], atol=1e-12)
        np.testing.assert_allclose(basis.v, [0, 0, 1], atol=1e-12)
        np.testing.assert_allclose(basis.origin, [2.5, 0, 0], atol=1e-12)

    def test_horizontal_plane_is_degenerate(self):
        with pytest.raises(DegenerateBasis):
            plane_basis(PlaneModel([0, 0, 1], 1.5))

    def test_project_then_lift_is_identity_on_plane(self, rng):
        points = np.array([board_point(u, v) for u, v in rng.uniform(-1, 1, (50, 2))])
        basis, uv = plane_project(points, BOARD_PLANE)
        np.testing.assert_allclose(lift_centers(basis, uv), points, atol=1e-9)

    def test_off_plane_component_discarded(self):
        basis, uv = plane_project(np.array([[2.45, -0.3, 0.1]]), BOARD_PLANE)
        np.testing.assert_allclose(uv, [[0.3, 0.1]], atol=1e-12)
        lifted = lift_centers(basis, uv)
        assert BOARD_PLANE.distance(lifted)[0] < 1e-9

    def test_basis_origin_lifts_to_itself(self):
        basis = plane_basis(BOARD_PLANE)
        np.testing.assert_allclose(lift_centers(basis, [[0.0, 0.0]]), [basis.origin])


class TestFindFourCircles:
    def test_exact_rims(self, target):
        centers = find_four_circles(hole_rims(target), target, exact_search())
        for truth in target.hole_centers():
            assert np.min(np.linalg.norm(centers - truth, axis=1)) < 1e-6

    def test_spurious_circle_excluded(self, target):
        points = np.vstack([hole_rims(target), hole_rims(target, centers=[[0.0, 0.0]])])
        centers = find_four_circles(points, target, exact_search())
        assert np.min(np.linalg.norm(centers, axis=1)) > 0.3

    def test_three_circles_are_not_enough(self, target):
        with pytest.raises(NotEnoughCircles):
            find_four_circles(hole_rims(target, centers=target.hole_centers()[:3]), target, exact_search())

    def test_too_few_points(self, target):
        with pytest.raises(NotEnoughCircles):
            find_four_circles(np.zeros((5, 2)), target, exact_search())

    def test_wrong_layout_is_rejected(self, target):
        stretched = target.hole_centers() * [1.3, 1.0]
        with pytest.raises(GeometryMismatch):
            find_four_circles(hole_rims(target, centers=stretched), target, exact_search())

    def test_input_order_does_not_matter(self, target, rng):
        points = hole_rims(target) + rng.normal(0, 0.002, (96, 2))
        search = CircleSearchConfig(RansacConfig(0.01, min_inliers=10))
        reference = find_four_circles(points, target, search)
        for _ in range(5):
            shuffled = points[rng.permutation(len(points))]
            np.testing.assert_allclose(find_four_circles(shuffled, target, search), reference, atol=1e-12)

    def test_search_config_sections(self):
        lidar = CircleSearchConfig.from_config({}, "lidar")
        stereo = CircleSearchConfig.from_config({"stereo_circle": {"min_inliers": 40}, "max_attempts": 5}, "stereo")
        assert (lidar.ransac.distance_threshold, lidar.ransac.min_inliers) == (0.02, 3)
        assert (stereo.ransac.distance_threshold, stereo.ransac.min_inliers) == (0.015, 40)
        assert stereo.max_attempts == 5


class TestCircleDetector:
    def test_lidar_centers_near_truth(self, config, setting7_frames, setting7, target):
        segmenter = LidarSegmenter(config["lidar_pipeline"], target)
        detector = CircleDetector(config["target_detection"], "lidar", target)
        truth = setting7.scene.hole_centers()
        for frame in setting7_frames[0]:
            result = segmenter.extract(frame)
            centers = detector.detect(result.edges.to_cloud(), result.plane)
            assert centers.shape == (4, 3)
            errors = np.linalg.norm(centers[:, None] - truth[None], axis=2).min(axis=1)
            assert np.all(errors < 0.02)
            assert np.all(result.plane.distance(centers) < 1e-9)

    def test_errors_are_tagged_with_sensor(self, target):
        detector = CircleDetector({}, "stereo", target)
        with pytest.raises(CalibrationError) as info:
            detector.detect(np.zeros((3, 3)) + [2.5, 0, 0], BOARD_PLANE)
        assert info.value.stage == "camera.circles"


class TestAccumulateAndCluster:
    def test_identical_frames(self, target):
        centers = truth_3d(target)
        centroids = accumulate_and_cluster([centers] * 10)
        assert len(centroids) == 4
        for truth in centers:
            assert np.min(np.linalg.norm(centroids - truth, axis=1)) < 1e-12

    def test_jittered_frames_match_mean(self, target):
        truth = truth_3d(target)
        errors = []
        for seed in range(20):
            local = np.random.default_rng(seed)
            frames = [truth + local.normal(0, 0.002, (4, 3)) for _ in range(30)]
            centroids = accumulate_and_cluster(frames)
            stacked = np.stack(frames)
            for centroid in centroids:
                hole = np.argmin(np.linalg.norm(truth - centroid, axis=1))
                np.testing.assert_allclose(centroid, stacked[:, hole].mean(axis=0), atol=1e-12)
                errors.append(np.linalg.norm(centroid - truth[hole]))
        assert np.median(errors) <= 0.001

    def test_rogue_center_rejected(self, target):
        truth = truth_3d(target)
        frames = [truth.copy() for _ in range(10)]
        frames[0] = np.vstack([truth, truth[0] + [0.0, 0.0, 0.1]])
        centroids = accumulate_and_cluster(frames)
        assert len(centroids) == 4
        np.testing.assert_allclose(np.sort(centroids, axis=0), np.sort(truth, axis=0), atol=1e-12)

    def test_failed_frames_do_not_count(self, target):
        truth = truth_3d(target)
        centroids = accumulate_and_cluster([truth, None, truth, np.zeros((0, 3)), truth])
        assert len(centroids) == 4

    def test_missing_hole_is_a_count_mismatch(self, target):
        with pytest.raises(ClusterCountMismatch):
            accumulate_and_cluster([truth_3d(target)[:3]] * 5)

    def test_no_detections(self):
        with pytest.raises(InsufficientDetections):
            accumulate_and_cluster([None, None])


class TestLabelCorners:
    def test_natural_labels(self, target):
        labeled = label_corners(truth_3d(target), BOARD_PLANE)
        np.testing.assert_allclose(labeled.tl, board_point(-0.25, 0.2))
        np.testing.assert_allclose(labeled.tr, board_point(0.25, 0.2))
        np.testing.assert_allclose(labeled.bl, board_point(-0.25, -0.2))
        np.testing.assert_allclose(labeled.br, board_point(0.25, -0.2))

    def test_order_invariance(self, target, rng):
        truth = truth_3d(target)
        reference = label_corners(truth, BOARD_PLANE).as_array()
        for _ in range(10):
            np.testing.assert_array_equal(label_corners(truth[rng.permutation(4)], BOARD_PLANE).as_array(), reference)

    def test_rolled_target(self, target):
        roll = np.deg2rad(15.0)
        c, s = np.cos(roll), np.sin(roll)
        uv = target.hole_centers() @ np.array([[c, s], [-s, c]])
        points = np.array([board_point(u, v) for u, v in uv])
        labeled = label_corners(points[::-1], BOARD_PLANE)
        np.testing.assert_allclose(labeled.as_array(), points, atol=1e-12)

    def test_yaw_rotation_relabels_consistently(self, target, rng):
        truth = truth_3d(target)
        for _ in range(100):
            r = rot_z(rng.uniform(-1.0, 1.0))
            shift = rng.uniform(-1, 1, 3)
            moved = truth @ r.T + shift
            plane = PlaneModel(r @ BOARD_PLANE.normal, BOARD_PLANE.d - float((r @ BOARD_PLANE.normal) @ shift))
            labeled = label_corners(moved[rng.permutation(4)], plane)
            np.testing.assert_allclose(labeled.as_array(), moved, atol=1e-9)

    def test_diamond_is_ambiguous(self):
        diamond = np.array([board_point(0, 0.3), board_point(0.3, 0), board_point(-0.3, 0), board_point(0, -0.3)])
        with pytest.raises(AmbiguousLabeling):
            label_corners(diamond, BOARD_PLANE)


class TestReferencePoints:
    def test_distinct_points_required(self):
        with pytest.raises(ValueError):
            ReferencePoints(np.zeros(3), np.zeros(3), np.ones(3), 2 * np.ones(3))

    def test_geometry_check(self, target):
        points = ReferencePoints.from_array(truth_3d(target))
        points.check_geometry(target, 0.06)
        stretched = ReferencePoints.from_array(truth_3d(target) * [1.0, 1.5, 1.0])
        with pytest.raises(GeometryMismatch):
            stretched.check_geometry(target, 0.06)

    def test_dict_form(self, target):
        points = ReferencePoints.from_array(truth_3d(target))
        assert set(points.to_dict()) == {"tl", "tr", "bl", "br"}
        np.testing.assert_allclose(points.to_dict()["br"], board_point(0.25, -0.2))
