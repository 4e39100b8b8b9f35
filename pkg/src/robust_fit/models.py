from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from src.errors import ConfigurationError


@dataclass(frozen=True)
class RansacConfig:
    """Sample-consensus settings shared by the plane, circle and line fitters"""
    distance_threshold: float
    max_iterations: int = 1000
    min_inliers: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ConfigurationError(f"distance_threshold must be > 0, got {self.distance_threshold}")
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.min_inliers < 0:
            raise ConfigurationError(f"min_inliers must be >= 0, got {self.min_inliers}")

    @classmethod
    def from_config(cls, section: Optional[Dict], distance_threshold: float,
                    min_inliers: int, seed: int = 0) -> "RansacConfig":
        section = section or {}
        return cls(
            distance_threshold=float(section.get("distance_threshold", distance_threshold)),
            max_iterations=int(section.get("max_iterations", 1000)),
            min_inliers=int(section.get("min_inliers", min_inliers)),
            rng_seed=int(section.get("seed", seed)),
        )


@dataclass(frozen=True)
class PlaneModel:
    """Plane n . p + d = 0 with unit normal"""
    normal: np.ndarray
    d: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(normal)
        if not norm > 0:
            raise ValueError("Plane normal must be non-zero")
        if abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "d", float(self.d) / norm)
            normal = normal / norm
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "d", float(self.d))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.normal + self.d

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(self.signed_distance(points))

    def oriented_toward(self, point=(0.0, 0.0, 0.0)) -> "PlaneModel":
        """Flip so that ``point`` lies on the positive side"""
        if float(np.dot(self.normal, point) + self.d) < 0:
            return PlaneModel(-self.normal, -self.d)
        return self

    def angle_to_axis(self, axis: np.ndarray) -> float:
        """Angle between the normal and ``axis`` in [0, pi/2]"""
        axis = np.asarray(axis, dtype=float)
        cos = abs(float(np.dot(self.normal, axis / np.linalg.norm(axis))))
        return float(np.arccos(min(1.0, cos)))

    def to_dict(self) -> dict:
        return {"normal": [float(v) for v in self.normal], "d": self.d}


@dataclass(frozen=True)
class Circle2D:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"Circle radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "radius", float(self.radius))

    def residuals(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance of each point to the rim"""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)


@dataclass(frozen=True)
class Line2D:
    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=float).reshape(2)
        direction = direction / np.linalg.norm(direction)
        # canonical sign keeps repeated fits byte-identical
        if direction[0] < 0 or (direction[0] == 0 and direction[1] < 0):
            direction = -direction
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(2))
        object.__setattr__(self, "direction", direction)

    def residuals(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=float).reshape(-1, 2) - self.point
        return np.abs(offsets[:, 0] * self.direction[1] - offsets[:, 1] * self.direction[0])

    def project(self, points: np.ndarray) -> np.ndarray:
        """Coordinate of each point along the line"""
        return (np.asarray(points, dtype=float).reshape(-1, 2) - self.point) @ self.direction
