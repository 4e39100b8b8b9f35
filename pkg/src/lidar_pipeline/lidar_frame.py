from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigurationError
from src.geometry.cloud import PointCloud


def ring_discontinuity(ranges: np.ndarray, rings: np.ndarray) -> np.ndarray:
    """
    Depth-jump magnitude max(r[i-1] - r[i], r[i+1] - r[i], 0) per point.

    Neighbors are the adjacent points of the same ring in the given order;
    ring endpoints use the one neighbor they have.
    """
    ranges = np.asarray(ranges, dtype=float)
    rings = np.asarray(rings)
    n = len(ranges)
    from_prev = np.full(n, -np.inf)
    from_next = np.full(n, -np.inf)
    if n > 1:
        same_ring = rings[1:] == rings[:-1]
        from_prev[1:] = np.where(same_ring, ranges[:-1] - ranges[1:], -np.inf)
        from_next[:-1] = np.where(same_ring, ranges[1:] - ranges[:-1], -np.inf)
    return np.maximum(np.maximum(from_prev, from_next), 0.0)


@dataclass(frozen=True)
class LidarFrame:
    """
    One revolution of a multi-layer lidar, ring-major and azimuth-ordered.

    ``discontinuity`` is computed once over the full rings when the frame is
    built, so cropped sub-frames keep their original neighbors.
    """
    points: np.ndarray
    rings: np.ndarray
    ranges: np.ndarray
    discontinuity: np.ndarray
    intensity: Optional[np.ndarray] = None

    @classmethod
    def from_points(cls, points: np.ndarray, rings: Sequence[int],
                    intensity: Optional[np.ndarray] = None) -> "LidarFrame":
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        rings = np.asarray(rings, dtype=int).reshape(-1)
        if len(rings) != len(points):
            raise ValueError(f"{len(rings)} ring indices for {len(points)} points")
        azimuth = np.arctan2(points[:, 1], points[:, 0])
        order = np.lexsort((azimuth, rings))
        points, rings = points[order], rings[order]
        if intensity is not None:
            intensity = np.asarray(intensity, dtype=float).reshape(-1)[order]
        ranges = np.linalg.norm(points, axis=1)
        return cls(points, rings, ranges, ring_discontinuity(ranges, rings), intensity)

    @classmethod
    def empty(cls) -> "LidarFrame":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=int), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def subset(self, selector) -> "LidarFrame":
        intensity = None if self.intensity is None else self.intensity[selector]
        return LidarFrame(self.points[selector], self.rings[selector], self.ranges[selector],
                          self.discontinuity[selector], intensity)

    def ring_ids(self) -> np.ndarray:
        return np.unique(self.rings)

    def to_cloud(self) -> PointCloud:
        return PointCloud(self.points, rings=self.rings, intensity=self.intensity)


@dataclass(frozen=True)
class PassthroughBounds:
    """Axis-aligned crop box in the sensor frame (meters, inclusive)"""
    x: Tuple[float, float] = (0.5, 5.0)
    y: Tuple[float, float] = (-4.0, 4.0)
    z: Tuple[float, float] = (-3.0, 3.0)

    def __post_init__(self):
        for axis in ("x", "y", "z"):
            lo, hi = (float(v) for v in getattr(self, axis))
            if not lo < hi:
                raise ConfigurationError(f"Pass-through bounds on {axis} need min < max, got {(lo, hi)}")
            object.__setattr__(self, axis, (lo, hi))

    @classmethod
    def from_config(cls, section: Optional[Dict], default: Optional["PassthroughBounds"] = None) -> "PassthroughBounds":
        section = section or {}
        default = default or cls()
        return cls(**{axis: tuple(section.get(axis, getattr(default, axis))) for axis in ("x", "y", "z")})

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        lows = np.array([self.x[0], self.y[0], self.z[0]])
        highs = np.array([self.x[1], self.y[1], self.z[1]])
        return np.all((points >= lows) & (points <= highs), axis=1)
