import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from src.errors import CalibrationError, NoModelFound
from src.geometry.cloud import PointCloud
from src.lidar_pipeline.lidar_frame import PassthroughBounds
from src.robust_fit.models import Line2D, PlaneModel, RansacConfig
from src.robust_fit.ransac import ransac_line2d, ransac_plane
from src.stereo_pipeline.camera_frame import CameraFrame
from src.target_detection.target_model import TargetModel

VERTICAL = (0.0, 0.0, 1.0)


def sobel_magnitude(image: np.ndarray) -> np.ndarray:
    """
    Saturating Sobel gradient magnitude

    Standard 3x3 kernels with edge replication at the border;
    value = min(255, round(sqrt(Gx^2 + Gy^2))).
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2 or min(image.shape) < 3:
        raise ValueError(f"Sobel needs a 2D image of at least 3x3, got {image.shape}")
    gx = ndimage.sobel(image, axis=1, mode='nearest')
    gy = ndimage.sobel(image, axis=0, mode='nearest')
    magnitude = np.floor(np.hypot(gx, gy) + 0.5)
    return np.minimum(magnitude, 255).astype(np.uint8)


def edge_gate(frame: CameraFrame, sobel: np.ndarray, tau: float = 128) -> PointCloud:
    """Keep defined cloud points whose pixel has a Sobel response >= tau"""
    sobel = np.asarray(sobel)
    if sobel.shape != frame.image.shape:
        raise ValueError(f"Sobel image {sobel.shape} does not match frame {frame.image.shape}")
    keep = frame.defined_mask() & (sobel >= tau)
    pixels = np.flatnonzero(keep.ravel())
    points = frame.cloud.reshape(-1, 3)[pixels]
    intensity = frame.image.ravel()[pixels]
    return PointCloud(points, intensity=intensity, pixels=pixels)


def passthrough_cloud(cloud: PointCloud, bounds: PassthroughBounds) -> PointCloud:
    return cloud.subset(bounds.contains(cloud.points))


def segment_plane_stereo(cloud: PointCloud, ransac_cfg: RansacConfig,
                         inlier_distance: float = 0.10, alpha_max: float = 0.55,
                         vertical_axis: Sequence[float] = VERTICAL) -> Tuple[PlaneModel, PointCloud]:
    """Target plane of the edge cloud, plus the points within ``inlier_distance`` of it"""
    if cloud.is_empty:
        raise CalibrationError("Empty stereo edge cloud", stage="camera.plane")
    plane, _ = ransac_plane(cloud.points, ransac_cfg, vertical_axis, alpha_max)
    return plane, cloud.subset(plane.distance(cloud.points) <= inlier_distance)


@dataclass(frozen=True)
class BorderLineConfig:
    angle_tolerance: float = np.deg2rad(10.0)
    span_fraction: float = 0.8
    offset_fraction: float = 0.1
    max_lines: int = 4
    max_attempts: int = 8
    distance_threshold: float = 0.01
    min_inliers: int = 20
    max_iterations: int = 1000
    seed: int = 0

    @classmethod
    def from_config(cls, section: Optional[Dict]) -> "BorderLineConfig":
        section = section or {}
        defaults = cls()
        return cls(**{name: type(getattr(defaults, name))(section.get(name, getattr(defaults, name)))
                      for name in cls.__dataclass_fields__})


def _border_line(line: Line2D, members: np.ndarray, points2d: np.ndarray,
                 target: TargetModel, cfg: BorderLineConfig) -> bool:
    """Axis-aligned, nearly board-long, and on the outline: no edge point lies beyond it"""
    along_u = float(np.arccos(min(1.0, abs(line.direction[0]))))
    along_v = float(np.arccos(min(1.0, abs(line.direction[1]))))
    if along_u <= cfg.angle_tolerance:
        length, half_size = target.board_w, target.board_h / 2.0
    elif along_v <= cfg.angle_tolerance:
        length, half_size = target.board_h, target.board_w / 2.0
    else:
        return False
    coords = line.project(members)
    if np.ptp(coords) < cfg.span_fraction * length:
        return False
    normal = np.array([line.direction[1], -line.direction[0]])
    side = (points2d - line.point) @ normal
    tolerance = cfg.offset_fraction * half_size
    return bool(side.min() >= -tolerance or side.max() <= tolerance)


def border_line_mask(points2d: np.ndarray, target: TargetModel, cfg: BorderLineConfig) -> np.ndarray:
    """Boolean mask of points that belong to accepted board-border lines"""
    points2d = np.asarray(points2d, dtype=float).reshape(-1, 2)
    removed = np.zeros(len(points2d), dtype=bool)
    if len(points2d) == 0:
        return removed
    active = np.ones(len(points2d), dtype=bool)
    lines_removed = 0
    for attempt in range(cfg.max_attempts):
        if lines_removed >= cfg.max_lines:
            break
        candidates = np.flatnonzero(active)
        if len(candidates) < max(cfg.min_inliers, 2):
            break
        ransac_cfg = RansacConfig(cfg.distance_threshold, cfg.max_iterations, cfg.min_inliers, cfg.seed + attempt)
        try:
            line, inliers = ransac_line2d(points2d[candidates], ransac_cfg)
        except NoModelFound:
            break
        members = candidates[inliers]
        if _border_line(line, points2d[members], points2d, target, cfg):
            removed[members] = True
            lines_removed += 1
        # rejected lines are withdrawn from the search but their points stay
        active[members] = False
    return removed


def remove_border_lines(points2d: np.ndarray, target: TargetModel,
                        cfg: Optional[BorderLineConfig] = None) -> np.ndarray:
    """Drop plane-space points lying on the board's outer edges"""
    points2d = np.asarray(points2d, dtype=float).reshape(-1, 2)
    return points2d[~border_line_mask(points2d, target, cfg or BorderLineConfig())]


@dataclass(frozen=True)
class StereoEdges:
    plane: PlaneModel
    edges: PointCloud


class StereoSegmenter:
    """Runs the stereo front end: Sobel gating, crop, plane segmentation"""

    def __init__(self, config: Dict, target: Optional[TargetModel] = None):
        self.config = config or {}
        self.logger = logging.getLogger(__name__)
        self.target = target or TargetModel()

        self.tau = float(self.config.get('sobel_threshold', 128))
        self.bounds = PassthroughBounds.from_config(
            self.config.get('passthrough'), PassthroughBounds(x=(0.5, 6.0)))
        ransac_section = self.config.get('ransac', {})
        self.ransac_cfg = RansacConfig(
            distance_threshold=float(self.config.get('plane_threshold', 0.01)),
            max_iterations=int(ransac_section.get('max_iterations', 1000)),
            min_inliers=int(ransac_section.get('min_inliers', 100)),
            rng_seed=int(ransac_section.get('seed', 0)),
        )
        self.inlier_distance = float(self.config.get('inlier_distance', 0.10))
        self.alpha_max = float(self.config.get('vertical_tolerance', 0.55))
        self.border_removal = bool(self.config.get('remove_border_lines', True))
        self.border_cfg = BorderLineConfig.from_config(self.config.get('border_lines'))

    def extract(self, frame: CameraFrame) -> StereoEdges:
        """
        Extract candidate edge points on the target plane from one stereo frame

        Args:
            frame: intensity image + organized cloud

        Returns:
            Target plane and the edge points within delta_inliers,c of it
        """
        try:
            sobel = sobel_magnitude(frame.image)
            edges = edge_gate(frame, sobel, self.tau)
            cropped = passthrough_cloud(edges, self.bounds)
            plane, on_plane = segment_plane_stereo(cropped, self.ransac_cfg, self.inlier_distance, self.alpha_max)
        except CalibrationError as e:
            raise e.with_stage("camera.segmentation")

        self.logger.debug(
            f"Stereo: {len(edges)} edge pts -> {len(cropped)} cropped -> {len(on_plane)} on plane"
        )
        return StereoEdges(plane, on_plane)

    def filter_borders(self, points2d: np.ndarray) -> np.ndarray:
        """Plane-space border removal, skipped when disabled in config"""
        if not self.border_removal:
            return np.asarray(points2d, dtype=float).reshape(-1, 2)
        return remove_border_lines(points2d, self.target, self.border_cfg)
