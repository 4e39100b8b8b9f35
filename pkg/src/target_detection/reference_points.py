import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from src.errors import AmbiguousLabeling, ClusterCountMismatch, GeometryMismatch, InsufficientDetections
from src.robust_fit.models import PlaneModel
from src.target_detection.plane_space import plane_basis
from src.target_detection.target_model import CORNER_LABELS, TargetModel

logger = logging.getLogger(__name__)

LABEL_TIE_TOL = 1e-3


@dataclass(frozen=True)
class ReferencePoints:
    """Four labeled hole-center centroids in one sensor's frame"""
    tl: np.ndarray
    tr: np.ndarray
    bl: np.ndarray
    br: np.ndarray

    def __post_init__(self):
        for label in CORNER_LABELS:
            object.__setattr__(self, label, np.asarray(getattr(self, label), dtype=float).reshape(3))
        stacked = self.as_array()
        for i, j in combinations(range(4), 2):
            if np.allclose(stacked[i], stacked[j], atol=1e-12):
                raise ValueError(f"Reference points {CORNER_LABELS[i]} and {CORNER_LABELS[j]} coincide")

    def as_array(self) -> np.ndarray:
        """(4, 3) in tl, tr, bl, br order"""
        return np.stack([getattr(self, label) for label in CORNER_LABELS])

    @classmethod
    def from_array(cls, points: np.ndarray) -> "ReferencePoints":
        points = np.asarray(points, dtype=float).reshape(4, 3)
        return cls(*points)

    def to_dict(self) -> Dict[str, List[float]]:
        return {label: [float(v) for v in getattr(self, label)] for label in CORNER_LABELS}

    def check_geometry(self, target: TargetModel, tolerance: float) -> None:
        """Raise GeometryMismatch unless the six distances match the board layout"""
        points = self.as_array()
        distances = np.sort([np.linalg.norm(a - b) for a, b in combinations(points, 2)])
        deviation = np.abs(distances - target.expected_distances())
        if deviation.max() > tolerance:
            raise GeometryMismatch(
                f"Reference points deviate {deviation.max():.4f} m from the hole layout (tolerance {tolerance})"
            )


def accumulate_and_cluster(per_frame_centers: Sequence[Optional[np.ndarray]], delta_cluster: float = 0.02,
                           min_fraction: float = 0.3) -> np.ndarray:
    """
    Pool per-frame centers and reduce them to four cluster centroids

    Single-linkage Euclidean clustering (DBSCAN with one sample per core is
    exactly that). A cluster survives when its size is within
    [min_fraction * N_valid, N_valid], N_valid being the number of frames that
    contributed centers.

    Args:
        per_frame_centers: one (k, 3) array per frame; None or empty for failed frames
        delta_cluster: linkage distance in meters
        min_fraction: lower cluster-size bound relative to N_valid

    Returns:
        (4, 3) centroids, largest cluster first
    """
    contributions = [np.asarray(c, dtype=float).reshape(-1, 3) for c in per_frame_centers
                     if c is not None and len(c) > 0]
    n_valid = len(contributions)
    if n_valid == 0:
        raise InsufficientDetections("No frame contributed circle centers")

    points = np.vstack(contributions)
    labels = DBSCAN(eps=delta_cluster, min_samples=1).fit(points).labels_

    survivors = []
    for label in np.unique(labels):
        members = labels == label
        size = int(members.sum())
        if min_fraction * n_valid <= size <= n_valid:
            survivors.append((size, int(label), points[members].mean(axis=0)))
        else:
            logger.debug(f"Rejected cluster of {size} centers (window {n_valid})")

    if len(survivors) != 4:
        raise ClusterCountMismatch(
            f"{len(survivors)} clusters survived the size window over {n_valid} frames, expected 4"
        )
    survivors.sort(key=lambda s: (-s[0], s[1]))
    return np.array([centroid for _, _, centroid in survivors])


def label_corners(centroids: np.ndarray, plane: PlaneModel) -> ReferencePoints:
    """
    Name the four centroids tl, tr, bl, br from their plane-space position

    The two highest along v are the top pair; within each pair the smaller u
    is left. Input order does not matter.
    """
    centroids = np.asarray(centroids, dtype=float).reshape(4, 3)
    uv = plane_basis(plane).to_plane(centroids)

    by_height = np.argsort(-uv[:, 1], kind="stable")
    if uv[by_height[1], 1] - uv[by_height[2], 1] < LABEL_TIE_TOL:
        raise AmbiguousLabeling("Top and bottom pairs are not separable along the vertical axis")

    labeled = {}
    for row, pair in (("t", by_height[:2]), ("b", by_height[2:])):
        left, right = sorted(pair, key=lambda i: uv[i, 0])
        if uv[right, 0] - uv[left, 0] < LABEL_TIE_TOL:
            raise AmbiguousLabeling(f"Left and right points of the {row} row tie horizontally")
        labeled[f"{row}l"] = centroids[left]
        labeled[f"{row}r"] = centroids[right]
    return ReferencePoints(**labeled)
