import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, List, Optional

import numpy as np

from src.errors import CalibrationError, GeometryMismatch, NoModelFound, NotEnoughCircles
from src.geometry.cloud import PointCloud
from src.robust_fit.models import PlaneModel, RansacConfig
from src.robust_fit.ransac import ransac_circle2d
from src.target_detection.plane_space import lift_centers, plane_project
from src.target_detection.target_model import TargetModel

MIN_POINTS = 8


@dataclass(frozen=True)
class CircleSearchConfig:
    ransac: RansacConfig
    max_attempts: int = 6
    distance_tolerance: float = 0.03

    @classmethod
    def from_config(cls, section: Dict, sensor: str) -> "CircleSearchConfig":
        """``sensor`` selects the ``lidar_circle`` or ``stereo_circle`` subsection"""
        defaults = {"lidar": (0.02, 3), "stereo": (0.015, 15)}[sensor]
        ransac = RansacConfig.from_config(section.get(f"{sensor}_circle"), *defaults,
                                          seed=int(section.get("seed", 0)))
        return cls(ransac=ransac,
                   max_attempts=int(section.get("max_attempts", 6)),
                   distance_tolerance=float(section.get("distance_tolerance", 0.03)))


def _pairwise_sorted(centers: np.ndarray) -> np.ndarray:
    return np.sort([np.linalg.norm(a - b) for a, b in combinations(centers, 2)])


def find_four_circles(points2d: np.ndarray, target: TargetModel, cfg: CircleSearchConfig) -> np.ndarray:
    """
    Locate the four hole centers among plane-space edge points

    Circles of the known radius are fitted one after another, removing each
    fit's inliers before the next attempt. Among the fitted candidates, the
    4-subset whose six center distances best match the target's layout wins.

    Args:
        points2d: (N, 2) plane-space points
        target: board geometry
        cfg: circle consensus + selection settings

    Returns:
        (4, 2) centers in order of discovery
    """
    points2d = np.asarray(points2d, dtype=float).reshape(-1, 2)
    if len(points2d) < MIN_POINTS:
        raise NotEnoughCircles(f"Need at least {MIN_POINTS} edge points, got {len(points2d)}")
    # input order must not leak into the sampling
    remaining = points2d[np.lexsort((points2d[:, 1], points2d[:, 0]))]

    candidates: List[np.ndarray] = []
    for attempt in range(cfg.max_attempts):
        if len(remaining) < 2:
            break
        attempt_cfg = RansacConfig(cfg.ransac.distance_threshold, cfg.ransac.max_iterations,
                                   cfg.ransac.min_inliers, cfg.ransac.rng_seed + attempt)
        try:
            circle, inliers = ransac_circle2d(remaining, target.hole_r, attempt_cfg)
        except NoModelFound:
            break
        candidates.append(circle.center)
        remaining = np.delete(remaining, inliers, axis=0)

    if len(candidates) < 4:
        raise NotEnoughCircles(f"Found {len(candidates)} circle candidates, need 4")

    expected = target.expected_distances()
    best_subset, best_score = None, np.inf
    for subset in combinations(range(len(candidates)), 4):
        deviation = np.abs(_pairwise_sorted(np.array([candidates[i] for i in subset])) - expected)
        if deviation.max() > cfg.distance_tolerance:
            continue
        score = float(deviation.sum())
        if score < best_score:
            best_subset, best_score = subset, score

    if best_subset is None:
        raise GeometryMismatch(
            f"No 4 of {len(candidates)} circles match the hole layout within {cfg.distance_tolerance} m"
        )
    return np.array([candidates[i] for i in best_subset])


class CircleDetector:
    """Per-frame hole-center detection on an already segmented target plane"""

    def __init__(self, config: Dict, sensor: str, target: Optional[TargetModel] = None):
        self.config = config or {}
        self.sensor = sensor
        self.logger = logging.getLogger(__name__)
        self.target = target or TargetModel()
        self.search = CircleSearchConfig.from_config(self.config, sensor)
        self.stage_prefix = "camera" if sensor == "stereo" else sensor

    def detect(self, edges: PointCloud, plane: PlaneModel,
               prefilter: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
        """
        Find the four hole centers of one frame in sensor coordinates

        Args:
            edges: rim candidate points
            plane: target plane of the same frame
            prefilter: optional plane-space filter run before circle search

        Returns:
            (4, 3) centers lying on ``plane``
        """
        stage = f"{self.stage_prefix}.circles"
        try:
            basis, points2d = plane_project(edges, plane)
            if prefilter is not None:
                points2d = prefilter(points2d)
            centers2d = find_four_circles(points2d, self.target, self.search)
        except CalibrationError as e:
            raise e.with_stage(stage)
        self.logger.debug(f"{self.sensor}: 4 circles from {len(points2d)} plane-space points")
        return lift_centers(basis, centers2d)
