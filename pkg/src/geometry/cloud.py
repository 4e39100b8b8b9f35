from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class PointCloud:
    """
    Ordered 3D points with optional per-point ring index and intensity.

    ``pixels`` holds the flat row-major image index of each point when the
    cloud was cut out of an organized stereo cloud.
    """
    points: np.ndarray
    rings: Optional[np.ndarray] = None
    intensity: Optional[np.ndarray] = None
    pixels: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "points", points)
        for name, dtype in (("rings", int), ("intensity", float), ("pixels", int)):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=dtype).reshape(-1)
                if len(value) != len(points):
                    raise ValueError(f"{name} has {len(value)} entries for {len(points)} points")
                object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def subset(self, selector) -> "PointCloud":
        """Keep points by boolean mask or index array, preserving order"""
        def pick(values):
            return None if values is None else values[selector]
        return PointCloud(self.points[selector], pick(self.rings), pick(self.intensity), pick(self.pixels))
