import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import CalibrationError, ConfigurationError
from src.lidar_pipeline.lidar_frame import LidarFrame, PassthroughBounds
from src.robust_fit.models import PlaneModel, RansacConfig
from src.robust_fit.ransac import ransac_plane
from src.target_detection.target_model import TargetModel

VERTICAL = (0.0, 0.0, 1.0)


def passthrough(frame: LidarFrame, bounds: PassthroughBounds) -> LidarFrame:
    """Keep the points inside the crop box; ring order is untouched"""
    return frame.subset(bounds.contains(frame.points))


def segment_plane_lidar(frame: LidarFrame, ransac_cfg: RansacConfig,
                        inlier_distance: float = 0.05, alpha_max: float = 0.55,
                        vertical_axis: Sequence[float] = VERTICAL) -> Tuple[PlaneModel, LidarFrame]:
    """
    Find the target plane and crop the frame around it

    Consensus uses the tight ``ransac_cfg.distance_threshold``; the returned
    sub-frame keeps everything within the looser ``inlier_distance``.
    """
    if frame.is_empty:
        raise CalibrationError("Empty lidar frame", stage="lidar.plane")
    plane, _ = ransac_plane(frame.points, ransac_cfg, vertical_axis, alpha_max)
    return plane, frame.subset(plane.distance(frame.points) <= inlier_distance)


def discontinuity_filter(frame: LidarFrame, delta: float = 0.5) -> LidarFrame:
    """Keep points whose full-ring depth jump is at least ``delta``"""
    return frame.subset(frame.discontinuity >= delta)


def ring_gate(frame: LidarFrame, target: TargetModel, min_points: int = 2, max_points: int = 8,
              trim_borders: bool = True, border_fraction: float = 0.5) -> LidarFrame:
    """
    Keep rings whose edge-point count can come from holes, then trim board borders

    A ring crossing both holes of a row yields four rim points and at most one
    border point per side. When the first-to-last extent of a ring exceeds the
    holes' span by more than ``border_fraction`` of the gap between that span and
    the board width, its first and last points are border echoes and are dropped.
    """
    keep = np.zeros(len(frame), dtype=bool)
    border_extent = target.circles_span + border_fraction * (target.board_w - target.circles_span)
    for ring in frame.ring_ids():
        members = np.flatnonzero(frame.rings == ring)
        if not min_points <= len(members) <= max_points:
            continue
        if trim_borders and len(members) >= 2:
            extent = np.linalg.norm(frame.points[members[-1]] - frame.points[members[0]])
            if extent > border_extent:
                members = members[1:-1]
        keep[members] = True
    return frame.subset(keep)


@dataclass(frozen=True)
class LidarEdges:
    plane: PlaneModel
    edges: LidarFrame


class LidarSegmenter:
    """Runs the lidar front end: crop, plane, depth discontinuities, ring gating"""

    def __init__(self, config: Dict, target: Optional[TargetModel] = None):
        self.config = config or {}
        self.logger = logging.getLogger(__name__)
        self.target = target or TargetModel()

        self.bounds = PassthroughBounds.from_config(self.config.get('passthrough'))
        ransac_section = self.config.get('ransac', {})
        self.ransac_cfg = RansacConfig(
            distance_threshold=float(self.config.get('plane_threshold', 0.01)),
            max_iterations=int(ransac_section.get('max_iterations', 1000)),
            min_inliers=int(ransac_section.get('min_inliers', 30)),
            rng_seed=int(ransac_section.get('seed', 0)),
        )
        self.inlier_distance = float(self.config.get('inlier_distance', 0.05))
        self.alpha_max = float(self.config.get('vertical_tolerance', 0.55))
        self.delta_discont = float(self.config.get('discontinuity_threshold', 0.5))
        gate = self.config.get('ring_gate', {})
        self.min_ring_points = int(gate.get('min_points', 2))
        self.max_ring_points = int(gate.get('max_points', 8))
        self.trim_borders = bool(gate.get('trim_borders', True))
        self.border_fraction = float(gate.get('border_fraction', 0.5))
        if not 0.0 <= self.border_fraction < 1.0:
            raise ConfigurationError(
                f"ring_gate.border_fraction must be in [0, 1), got {self.border_fraction}", stage="config"
            )

    def extract(self, frame: LidarFrame) -> LidarEdges:
        """
        Extract candidate hole-rim points from one lidar frame

        Args:
            frame: full revolution with rings

        Returns:
            Target plane and the gated rim points on it
        """
        try:
            cropped = passthrough(frame, self.bounds)
            plane, on_plane = segment_plane_lidar(cropped, self.ransac_cfg, self.inlier_distance, self.alpha_max)
            edges = discontinuity_filter(on_plane, self.delta_discont)
            gated = ring_gate(edges, self.target, self.min_ring_points, self.max_ring_points,
                              self.trim_borders, self.border_fraction)
        except CalibrationError as e:
            raise e.with_stage("lidar.segmentation")

        self.logger.debug(
            f"Lidar: {len(frame)} pts -> {len(cropped)} cropped -> {len(on_plane)} on plane "
            f"-> {len(edges)} edges -> {len(gated)} gated"
        )
        return LidarEdges(plane, gated)
