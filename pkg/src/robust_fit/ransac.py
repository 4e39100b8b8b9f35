"""
Sample-consensus fitting for the three models the segmentation stages need:
a plane constrained to contain the vertical axis, a fixed-radius 2D circle and a
2D line.

Hypotheses are drawn from minimal samples (3 / 2 / 2 points) with a seeded
generator, scored by inlier count, and the winner is refined by least squares.
A refinement is kept only if it does not lose consensus.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import NoModelFound
from src.geometry.cloud import PointCloud
from src.robust_fit.models import Circle2D, Line2D, PlaneModel, RansacConfig

logger = logging.getLogger(__name__)

SCORE_CHUNK = 64
DEGENERATE_EPS = 1e-12
GAUSS_NEWTON_STEPS = 20


def _as_points(data: Union[PointCloud, np.ndarray], dim: int) -> np.ndarray:
    if isinstance(data, PointCloud):
        return data.points
    return np.asarray(data, dtype=float).reshape(-1, dim)


def _best_candidate(count_fn: Callable[[slice], np.ndarray], n_candidates: int) -> Tuple[int, int]:
    """Index and inlier count of the first candidate with maximal consensus"""
    best_index, best_count = -1, -1
    for start in range(0, n_candidates, SCORE_CHUNK):
        counts = count_fn(slice(start, min(start + SCORE_CHUNK, n_candidates)))
        if len(counts) == 0:
            continue
        local = int(np.argmax(counts))
        if counts[local] > best_count:
            best_index, best_count = start + local, int(counts[local])
    return best_index, best_count


def fit_plane_lstsq(points: np.ndarray, toward: Sequence[float] = (0.0, 0.0, 0.0)) -> PlaneModel:
    """Total least-squares plane through ``points``, normal oriented toward ``toward``"""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 3:
        raise NoModelFound(f"Plane fit needs 3 points, got {len(points)}")
    centroid = points.mean(axis=0)
    _, singular, vt = np.linalg.svd(points - centroid, full_matrices=False)
    if singular[1] <= DEGENERATE_EPS * max(1.0, singular[0]):
        raise NoModelFound("Points are collinear; plane undefined")
    normal = vt[2]
    return PlaneModel(normal, -float(normal @ centroid)).oriented_toward(toward)


def _satisfies_vertical(normal: np.ndarray, vertical: np.ndarray, sin_alpha: float) -> bool:
    return abs(float(normal @ vertical)) <= sin_alpha + 1e-12


def ransac_plane(cloud: Union[PointCloud, np.ndarray], cfg: RansacConfig,
                 vertical_axis: Sequence[float] = (0.0, 0.0, 1.0),
                 alpha_max: float = 0.55) -> Tuple[PlaneModel, np.ndarray]:
    """
    Fit a plane that contains ``vertical_axis`` within ``alpha_max`` radians

    Args:
        cloud: points to fit
        cfg: consensus settings (threshold is delta_plane)
        vertical_axis: sensor up direction
        alpha_max: allowed deviation of the plane from vertical

    Returns:
        (plane oriented toward the sensor origin, sorted inlier indices)
    """
    points = _as_points(cloud, 3)
    n = len(points)
    if n < 3:
        raise NoModelFound(f"Plane segmentation needs 3 points, got {n}")
    vertical = np.asarray(vertical_axis, dtype=float)
    vertical = vertical / np.linalg.norm(vertical)
    sin_alpha = float(np.sin(alpha_max))

    rng = np.random.default_rng(cfg.rng_seed)
    samples = rng.integers(0, n, size=(cfg.max_iterations, 3))
    p0, p1, p2 = points[samples[:, 0]], points[samples[:, 1]], points[samples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    usable = norms > DEGENERATE_EPS
    normals = normals[usable] / norms[usable, None]
    offsets = -np.einsum("ij,ij->i", normals, p0[usable])
    # vertical constraint: constraint-violating hypotheses are skipped, not penalized
    keep = np.abs(normals @ vertical) <= sin_alpha + 1e-12
    normals, offsets = normals[keep], offsets[keep]

    threshold = cfg.distance_threshold

    def count(chunk: slice) -> np.ndarray:
        return (np.abs(points @ normals[chunk].T + offsets[chunk]) <= threshold).sum(axis=0)

    best, best_count = _best_candidate(count, len(normals))
    if best < 0 or best_count < max(cfg.min_inliers, 3):
        raise NoModelFound(
            f"No vertical plane with >= {cfg.min_inliers} inliers "
            f"(best {max(best_count, 0)} of {n} points)"
        )

    plane = PlaneModel(normals[best], offsets[best]).oriented_toward()
    inliers = np.flatnonzero(plane.distance(points) <= threshold)
    try:
        refined = fit_plane_lstsq(points[inliers])
        refined_inliers = np.flatnonzero(refined.distance(points) <= threshold)
        if (_satisfies_vertical(refined.normal, vertical, sin_alpha)
                and len(refined_inliers) >= len(inliers)):
            plane, inliers = refined, refined_inliers
    except NoModelFound:
        pass

    logger.debug(f"Plane n={plane.normal.round(4)} d={plane.d:.4f} with {len(inliers)}/{n} inliers")
    return plane, inliers


def _refine_circle_center(points: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Gauss-Newton on rim residuals with the radius held fixed"""
    center = center.astype(float).copy()
    for _ in range(GAUSS_NEWTON_STEPS):
        offsets = points - center
        dist = np.linalg.norm(offsets, axis=1)
        if np.any(dist < DEGENERATE_EPS):
            break
        residual = dist - radius
        jacobian = -offsets / dist[:, None]
        step, *_ = np.linalg.lstsq(jacobian, -residual, rcond=None)
        center += step
        if np.linalg.norm(step) < 1e-13:
            break
    return center


def ransac_circle2d(points: np.ndarray, radius: float,
                    cfg: RansacConfig) -> Tuple[Circle2D, np.ndarray]:
    """
    Fit a circle of known ``radius`` to 2D points

    Every 2-point sample closer than the diameter yields the two centers that
    put both points on the rim; both are scored.

    Returns:
        (circle, sorted inlier indices)
    """
    points = _as_points(points, 2)
    n = len(points)
    if n < 2:
        raise NoModelFound(f"Circle fit needs 2 points, got {n}")

    rng = np.random.default_rng(cfg.rng_seed)
    samples = rng.integers(0, n, size=(cfg.max_iterations, 2))
    a, b = points[samples[:, 0]], points[samples[:, 1]]
    chord = b - a
    length = np.linalg.norm(chord, axis=1)
    usable = (length > DEGENERATE_EPS) & (length <= 2.0 * radius)
    a, chord, length = a[usable], chord[usable], length[usable]
    mid = a + 0.5 * chord
    height = np.sqrt(np.maximum(radius ** 2 - (0.5 * length) ** 2, 0.0))
    perp = np.stack([-chord[:, 1], chord[:, 0]], axis=1) / length[:, None]
    centers = np.empty((2 * len(mid), 2))
    centers[0::2] = mid + height[:, None] * perp
    centers[1::2] = mid - height[:, None] * perp

    threshold = cfg.distance_threshold

    def count(chunk: slice) -> np.ndarray:
        c = centers[chunk]
        dist = np.sqrt((points[:, 0:1] - c[:, 0]) ** 2 + (points[:, 1:2] - c[:, 1]) ** 2)
        return (np.abs(dist - radius) <= threshold).sum(axis=0)

    best, best_count = _best_candidate(count, len(centers))
    if best < 0 or best_count < max(cfg.min_inliers, 1):
        raise NoModelFound(
            f"No circle of radius {radius} with >= {cfg.min_inliers} inliers "
            f"(best {max(best_count, 0)} of {n} points)"
        )

    circle = Circle2D(centers[best], radius)
    inliers = np.flatnonzero(circle.residuals(points) <= threshold)
    refined = Circle2D(_refine_circle_center(points[inliers], circle.center, radius), radius)
    refined_inliers = np.flatnonzero(refined.residuals(points) <= threshold)
    if len(refined_inliers) >= len(inliers):
        circle, inliers = refined, refined_inliers
    return circle, inliers


def ransac_line2d(points: np.ndarray, cfg: RansacConfig) -> Tuple[Line2D, np.ndarray]:
    """
    Fit a 2D line by sample consensus

    Returns:
        (line, sorted inlier indices)
    """
    points = _as_points(points, 2)
    n = len(points)
    if n < 2:
        raise NoModelFound(f"Line fit needs 2 points, got {n}")

    rng = np.random.default_rng(cfg.rng_seed)
    samples = rng.integers(0, n, size=(cfg.max_iterations, 2))
    anchors = points[samples[:, 0]]
    directions = points[samples[:, 1]] - anchors
    norms = np.linalg.norm(directions, axis=1)
    usable = norms > DEGENERATE_EPS
    anchors, directions = anchors[usable], directions[usable] / norms[usable, None]
    offsets = anchors[:, 0] * directions[:, 1] - anchors[:, 1] * directions[:, 0]

    threshold = cfg.distance_threshold

    def count(chunk: slice) -> np.ndarray:
        d = directions[chunk]
        dist = np.abs(points[:, 0:1] * d[:, 1] - points[:, 1:2] * d[:, 0] - offsets[chunk])
        return (dist <= threshold).sum(axis=0)

    best, best_count = _best_candidate(count, len(directions))
    if best < 0 or best_count < max(cfg.min_inliers, 2):
        raise NoModelFound(
            f"No line with >= {cfg.min_inliers} inliers (best {max(best_count, 0)} of {n} points)"
        )

    line = Line2D(anchors[best], directions[best])
    inliers = np.flatnonzero(line.residuals(points) <= threshold)
    refined = _refit_line(points[inliers])
    if refined is not None:
        refined_inliers = np.flatnonzero(refined.residuals(points) <= threshold)
        if len(refined_inliers) >= len(inliers):
            line, inliers = refined, refined_inliers
    return line, inliers


def _refit_line(points: np.ndarray) -> Optional[Line2D]:
    """Principal-axis line through the inliers"""
    if len(points) < 2:
        return None
    centroid = points.mean(axis=0)
    _, singular, vt = np.linalg.svd(points - centroid, full_matrices=False)
    if singular[0] <= DEGENERATE_EPS:
        return None
    return Line2D(centroid, vt[0])
