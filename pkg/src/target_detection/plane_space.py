from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from src.errors import DegenerateBasis
from src.geometry.cloud import PointCloud
from src.robust_fit.models import PlaneModel

WORLD_UP = (0.0, 0.0, 1.0)
DEGENERATE_TOL = 1e-6


@dataclass(frozen=True)
class PlaneBasis:
    """
    2D frame on a fitted plane.

    ``v`` is the world vertical projected onto the plane and ``u = v x normal``,
    which points to the right of a viewer standing on the normal side.
    """
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    normal: np.ndarray

    def to_plane(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=float).reshape(-1, 3) - self.origin
        return np.stack([offsets @ self.u, offsets @ self.v], axis=1)

    def to_world(self, points2d: np.ndarray) -> np.ndarray:
        points2d = np.asarray(points2d, dtype=float).reshape(-1, 2)
        return self.origin + np.outer(points2d[:, 0], self.u) + np.outer(points2d[:, 1], self.v)


def plane_basis(plane: PlaneModel, up: Sequence[float] = WORLD_UP) -> PlaneBasis:
    up = np.asarray(up, dtype=float)
    up = up / np.linalg.norm(up)
    normal = plane.normal
    if np.linalg.norm(np.cross(normal, up)) < DEGENERATE_TOL:
        raise DegenerateBasis("Plane normal is parallel to the vertical; in-plane axes undefined")
    v = up - (up @ normal) * normal
    v = v / np.linalg.norm(v)
    u = np.cross(v, normal)
    return PlaneBasis(origin=-plane.d * normal, u=u, v=v, normal=normal.copy())


def plane_project(cloud: Union[PointCloud, np.ndarray], plane: PlaneModel) -> Tuple[PlaneBasis, np.ndarray]:
    """
    Orthogonally project points onto ``plane`` and express them in its basis

    The off-plane component is discarded; because u and v are orthogonal to the
    normal, dropping it and taking in-plane coordinates are the same operation.

    Returns:
        (basis, (N, 2) plane-space coordinates)
    """
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float).reshape(-1, 3)
    basis = plane_basis(plane)
    return basis, basis.to_plane(points)


def lift_centers(basis: PlaneBasis, centers2d: np.ndarray) -> np.ndarray:
    """Map plane-space points back into the sensor frame (exact inverse of the projection)"""
    return basis.to_world(centers2d)
