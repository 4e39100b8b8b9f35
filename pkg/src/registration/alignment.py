"""
Closed-form pieces of the two-stage registration: a translation-only least
squares over labeled reference points, followed by a rigid ICP correction.
"""

import logging

import numpy as np
from scipy.linalg import qr, solve_triangular
from sklearn.neighbors import NearestNeighbors

from src.errors import ConfigurationError, DegenerateConfiguration
from src.geometry.transforms import RigidTransform, compose, transform_points
from src.target_detection.reference_points import ReferencePoints

logger = logging.getLogger(__name__)

COLLINEAR_TOL = 1e-6
ASSOCIATIONS = ("labels", "nearest")


def translation_ls(ref_c: ReferencePoints, ref_l: ReferencePoints) -> np.ndarray:
    """
    Translation t minimizing sum_i ||(l_i - c_i) - t||^2 over the four labels

    The 12 x 3 system [I; I; I; I] t = [l_i - c_i] is solved through a
    column-pivoting QR decomposition.
    """
    differences = ref_l.as_array() - ref_c.as_array()
    a = np.tile(np.eye(3), (4, 1))
    b = differences.reshape(-1)
    q, r, pivots = qr(a, mode='economic', pivoting=True)
    solution = solve_triangular(r, q.T @ b)
    t = np.empty(3)
    t[pivots] = solution
    return t


def _check_spread(points: np.ndarray, name: str) -> None:
    singular = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    if singular[1] < COLLINEAR_TOL:
        raise DegenerateConfiguration(f"{name} points are collinear; rotation is undetermined")


def best_rigid_fit(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Least-squares rotation + translation taking ``source`` onto ``target`` (SVD, reflection-safe)"""
    source_centroid = source.mean(axis=0)
    target_centroid = target.mean(axis=0)
    h = (source - source_centroid).T @ (target - target_centroid)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    rotation = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation, target_centroid - rotation @ source_centroid)


def _rms(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def icp_refine(moved_c: np.ndarray, ref_l: np.ndarray, association: str = "labels",
               max_iterations: int = 100, tolerance: float = 1e-9) -> RigidTransform:
    """
    Point-to-point ICP between the translated camera centroids and the lidar ones

    Args:
        moved_c: (4, 3) camera reference points after the translation stage
        ref_l: (4, 3) lidar reference points, same label order
        association: ``labels`` pairs points by index; ``nearest`` re-associates
            by closest point every iteration
        max_iterations: iteration cap
        tolerance: stop once the RMS changes by less than this

    Returns:
        Accumulated rigid correction mapping ``moved_c`` onto ``ref_l``
    """
    if association not in ASSOCIATIONS:
        raise ConfigurationError(f"Unknown ICP association '{association}', expected one of {ASSOCIATIONS}")
    if max_iterations < 1:
        raise ConfigurationError(f"ICP needs at least one iteration, got {max_iterations}")
    source = np.asarray(moved_c, dtype=float).reshape(-1, 3)
    target = np.asarray(ref_l, dtype=float).reshape(-1, 3)
    _check_spread(source, "Camera")
    _check_spread(target, "Lidar")

    neighbors = NearestNeighbors(n_neighbors=1).fit(target) if association == "nearest" else None

    def matched(points: np.ndarray) -> np.ndarray:
        if neighbors is None:
            return target
        _, indices = neighbors.kneighbors(points)
        return target[indices[:, 0]]

    total = RigidTransform.identity()
    current = source.copy()
    previous = _rms(current, matched(current))
    for iteration in range(max_iterations):
        pairs = matched(current)
        step = best_rigid_fit(current, pairs)
        current = transform_points(step, current)
        total = compose(step, total)
        error = _rms(current, pairs)
        if abs(previous - error) < tolerance:
            break
        previous = error
    logger.debug(f"ICP stopped after {iteration + 1} iterations, rms {error:.6f} m")
    return total
