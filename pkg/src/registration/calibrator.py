import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.config import load_config
from src.errors import CalibrationError, InsufficientDetections
from src.geometry.transforms import (
    Pose6, RigidTransform, compose, pose_to_transform, transform_points, transform_to_pose,
)
from src.lidar_pipeline.lidar_frame import LidarFrame
from src.lidar_pipeline.lidar_segmenter import LidarSegmenter
from src.registration.alignment import icp_refine, translation_ls
from src.robust_fit.ransac import fit_plane_lstsq
from src.stereo_pipeline.camera_frame import CameraFrame
from src.stereo_pipeline.stereo_segmenter import StereoSegmenter
from src.target_detection.circle_detector import CircleDetector
from src.target_detection.reference_points import ReferencePoints, accumulate_and_cluster, label_corners
from src.target_detection.target_model import TargetModel
from src.utils.monitoring import frames_processed, monitor_calibration

DIRECTION = "camera_to_lidar"


@dataclass(frozen=True)
class CalibrationResult:
    """Estimated camera-to-lidar extrinsics, p_l = T p_c"""
    pose: Pose6
    transform: RigidTransform
    rms_residual: float
    lidar_frames_used: int
    camera_frames_used: int
    frames_total: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def frames_used(self) -> int:
        """Frames that contributed on the weaker sensor"""
        return min(self.lidar_frames_used, self.camera_frames_used)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "direction": DIRECTION,
            "pose": self.pose.to_dict(),
            "matrix": self.transform.as_matrix().tolist(),
            "rms_residual": self.rms_residual,
            "frames_used": self.frames_used,
            "lidar_frames_used": self.lidar_frames_used,
            "camera_frames_used": self.camera_frames_used,
            "frames_total": self.frames_total,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CalibrationResult":
        pose = Pose6.from_dict(data["pose"])
        return cls(
            pose=pose,
            transform=RigidTransform.from_matrix(np.asarray(data["matrix"], dtype=float)),
            rms_residual=float(data["rms_residual"]),
            lidar_frames_used=int(data["lidar_frames_used"]),
            camera_frames_used=int(data["camera_frames_used"]),
            frames_total=int(data["frames_total"]),
            diagnostics=data.get("diagnostics", {}),
            config=data.get("config", {}),
        )


def register(ref_c: ReferencePoints, ref_l: ReferencePoints, association: str = "labels",
             max_iterations: int = 100, tolerance: float = 1e-9) -> RigidTransform:
    """Translation least squares, then ICP; returns T = T_icp o T_translation"""
    t_prime = translation_ls(ref_c, ref_l)
    translation_stage = RigidTransform(np.eye(3), t_prime)
    try:
        correction = icp_refine(transform_points(translation_stage, ref_c.as_array()), ref_l.as_array(),
                                association, max_iterations, tolerance)
    except CalibrationError as e:
        raise e.with_stage("registration.icp")
    return compose(correction, translation_stage)


class ExtrinsicCalibrator:
    """Runs both sensor pipelines over a window of frames and registers the result"""

    def __init__(self, config: Dict):
        self.config = config or {}
        self.logger = logging.getLogger(__name__)
        self.target = TargetModel.from_config(self.config.get('target'))

        detection = self.config.get('target_detection', {})
        self.lidar_segmenter = LidarSegmenter(self.config.get('lidar_pipeline', {}), self.target)
        self.stereo_segmenter = StereoSegmenter(self.config.get('stereo_pipeline', {}), self.target)
        self.lidar_detector = CircleDetector(detection, 'lidar', self.target)
        self.stereo_detector = CircleDetector(detection, 'stereo', self.target)
        self.delta_cluster = float(detection.get('cluster_tolerance', 0.02))
        self.distance_tolerance = float(detection.get('distance_tolerance', 0.03))
        self.min_fraction = float(detection.get('cluster_min_fraction', 0.3))

        registration = self.config.get('registration', {})
        self.association = registration.get('association', 'labels')
        self.icp_max_iterations = int(registration.get('icp_max_iterations', 100))
        self.icp_tolerance = float(registration.get('icp_tolerance', 1e-9))
        self.workers = max(1, int(registration.get('workers', 1)))

    def lidar_centers(self, frame: LidarFrame) -> np.ndarray:
        edges = self.lidar_segmenter.extract(frame)
        return self.lidar_detector.detect(edges.edges.to_cloud(), edges.plane)

    def camera_centers(self, frame: CameraFrame) -> np.ndarray:
        edges = self.stereo_segmenter.extract(frame)
        return self.stereo_detector.detect(edges.edges, edges.plane,
                                           prefilter=self.stereo_segmenter.filter_borders)

    def _collect(self, sensor: str, frames: Sequence, extract: Callable) -> List[Optional[np.ndarray]]:
        def run(indexed):
            index, frame = indexed
            try:
                centers = extract(frame)
            except CalibrationError as e:
                self.logger.warning(f"{sensor} frame {index} skipped: {e}")
                frames_processed.labels(sensor=sensor, outcome='rejected').inc()
                return None
            frames_processed.labels(sensor=sensor, outcome='valid').inc()
            return centers

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(run, enumerate(frames)))
        return [run(item) for item in enumerate(frames)]

    def reference_points(self, sensor: str, per_frame: List[Optional[np.ndarray]]) -> ReferencePoints:
        """Cluster a sensor's per-frame centers and label the four centroids"""
        try:
            centroids = accumulate_and_cluster(per_frame, self.delta_cluster, self.min_fraction)
        except CalibrationError as e:
            raise e.with_stage(f"{sensor}.cluster")
        try:
            labeled = label_corners(centroids, fit_plane_lstsq(centroids))
            labeled.check_geometry(self.target, self.distance_tolerance)
        except CalibrationError as e:
            raise e.with_stage(f"{sensor}.label")
        return labeled

    @monitor_calibration
    def calibrate(self, lidar_frames: Sequence[LidarFrame], camera_frames: Sequence[CameraFrame]) -> CalibrationResult:
        """
        Estimate the camera-to-lidar transform from a static window of frames

        Frames whose segmentation fails are skipped; errors after accumulation
        propagate tagged with their stage.

        Args:
            lidar_frames: lidar revolutions
            camera_frames: stereo frames (intensity + organized cloud)

        Returns:
            CalibrationResult with pose, residual and frame counts
        """
        lidar_centers = self._collect('lidar', lidar_frames, self.lidar_centers)
        camera_centers = self._collect('camera', camera_frames, self.camera_centers)
        n_lidar = sum(c is not None for c in lidar_centers)
        n_camera = sum(c is not None for c in camera_centers)
        self.logger.info(
            f"Valid frames: lidar {n_lidar}/{len(lidar_frames)}, camera {n_camera}/{len(camera_frames)}"
        )
        if n_lidar == 0:
            raise InsufficientDetections("No lidar frame produced four circles", stage="lidar")
        if n_camera == 0:
            raise InsufficientDetections("No camera frame produced four circles", stage="camera")

        ref_l = self.reference_points('lidar', lidar_centers)
        ref_c = self.reference_points('camera', camera_centers)

        estimate = register(ref_c, ref_l, self.association, self.icp_max_iterations, self.icp_tolerance)
        pose = transform_to_pose(estimate)
        transform = pose_to_transform(pose)
        residual = transform_points(transform, ref_c.as_array()) - ref_l.as_array()
        rms = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
        self.logger.info(f"Calibrated pose {pose.to_dict()} with rms residual {rms:.5f} m")

        diagnostics = {
            "translation_stage": [float(v) for v in translation_ls(ref_c, ref_l)],
            "reference_points": {"lidar": ref_l.to_dict(), "camera": ref_c.to_dict()},
            "target": self.target.to_dict(),
        }
        return CalibrationResult(pose, transform, rms, n_lidar, n_camera,
                                 max(len(lidar_frames), len(camera_frames)), diagnostics, self.config)


def calibrate(lidar_frames: Sequence[LidarFrame], camera_frames: Sequence[CameraFrame],
              config: Optional[Dict] = None) -> CalibrationResult:
    """Module-level shortcut for ``ExtrinsicCalibrator(config).calibrate``"""
    return ExtrinsicCalibrator(config if config is not None else load_config()).calibrate(lidar_frames, camera_frames)
