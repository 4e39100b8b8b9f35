"""
Static calibration scene in the lidar frame: the four-hole board, an optional
ground plane and a background wall parallel to the board.

The board frame has ``e_b`` pointing up, ``n`` pointing horizontally from the
board toward the lidar and ``e_a = e_b x n`` to the right of a viewer facing the
board. Plane-space hole centers (u right, v up) map to ``center + u e_a + v e_b``.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.errors import SceneValidationError
from src.geometry.transforms import Pose6, RigidTransform, invert, pose_to_transform, transform_points
from src.simulator.specs import CameraSpec, LidarSpec, setting_pose
from src.target_detection.target_model import TargetModel

logger = logging.getLogger(__name__)

MISS, BOARD, WALL, GROUND = 0, 1, 2, 3
HIT_EPS = 1e-9

# board texture: mean 160, +/-40, wavelength short enough for stereo texture but
# gentle enough to stay under the Sobel gate
TEXTURE_MEAN = 160.0
TEXTURE_AMPLITUDE = 40.0
TEXTURE_WAVELENGTH = 0.08
BACKGROUND_INTENSITY = 30.0
GROUND_INTENSITY = 90.0

HOLE_CHORD_FRACTION = 0.9
IMAGE_MARGIN = 10.0
MAX_VIEW_ANGLE = np.deg2rad(60.0)
HEIGHT_STEP = 0.025
BEARING_STEP = 0.05
SEARCH_STEPS = 8


@dataclass(frozen=True)
class TargetPlacement:
    """Board center and bearing (azimuth of the center seen from the lidar)"""
    center: np.ndarray
    bearing: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "bearing", float(self.bearing))

    @property
    def normal(self) -> np.ndarray:
        return -np.array([np.cos(self.bearing), np.sin(self.bearing), 0.0])

    @property
    def up(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    @property
    def right(self) -> np.ndarray:
        return np.cross(self.up, self.normal)

    @classmethod
    def at(cls, distance: float, bearing: float, height: float) -> "TargetPlacement":
        return cls(np.array([distance * np.cos(bearing), distance * np.sin(bearing), height]), bearing)

    def to_dict(self) -> Dict:
        return {"center": [float(v) for v in self.center], "bearing": self.bearing}

    @classmethod
    def from_dict(cls, data: Dict) -> "TargetPlacement":
        return cls(np.asarray(data["center"], dtype=float), float(data["bearing"]))


@dataclass(frozen=True)
class Scene:
    target: TargetModel
    placement: TargetPlacement
    ground: bool = True
    ground_height: float = 1.5
    wall_distance: Optional[float] = 6.0

    def hole_centers(self) -> np.ndarray:
        """(4, 3) hole centers in the lidar frame, tl, tr, bl, br order"""
        uv = self.target.hole_centers()
        p = self.placement
        return p.center + np.outer(uv[:, 0], p.right) + np.outer(uv[:, 1], p.up)

    def board_corners(self) -> np.ndarray:
        hw, hh = self.target.board_w / 2.0, self.target.board_h / 2.0
        uv = np.array([[-hw, hh], [hw, hh], [-hw, -hh], [hw, -hh]])
        p = self.placement
        return p.center + np.outer(uv[:, 0], p.right) + np.outer(uv[:, 1], p.up)

    def board_coordinates(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=float).reshape(-1, 3) - self.placement.center
        return np.stack([offsets @ self.placement.right, offsets @ self.placement.up], axis=1)

    def _plane_hits(self, origin: np.ndarray, directions: np.ndarray,
                    point: np.ndarray, normal: np.ndarray) -> np.ndarray:
        denom = directions @ normal
        with np.errstate(divide='ignore', invalid='ignore'):
            t = ((point - origin) @ normal) / denom
        t[~np.isfinite(t) | (t <= HIT_EPS)] = np.inf
        return t

    def intersect(self, origin, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Cast rays from one origin against board, wall and ground

        Args:
            origin: (3,) ray origin in the lidar frame
            directions: (N, 3) ray directions (need not be unit length)

        Returns:
            (hit parameter t with inf for misses, hit kind per ray)
        """
        origin = np.asarray(origin, dtype=float).reshape(3)
        directions = np.asarray(directions, dtype=float).reshape(-1, 3)
        p = self.placement
        candidates = np.full((3, len(directions)), np.inf)

        t_board = self._plane_hits(origin, directions, p.center, p.normal)
        finite = np.isfinite(t_board)
        ab = self.board_coordinates(origin + directions[finite] * t_board[finite, None])
        on_board = (np.abs(ab[:, 0]) <= self.target.board_w / 2.0) & (np.abs(ab[:, 1]) <= self.target.board_h / 2.0)
        in_hole = np.zeros(len(ab), dtype=bool)
        for center in self.target.hole_centers():
            in_hole |= np.sum((ab - center) ** 2, axis=1) < self.target.hole_r ** 2
        board_t = np.full(int(finite.sum()), np.inf)
        solid = on_board & ~in_hole
        board_t[solid] = t_board[finite][solid]
        candidates[0, finite] = board_t

        if self.wall_distance is not None:
            wall_point = p.center - self.wall_distance * p.normal
            candidates[1] = self._plane_hits(origin, directions, wall_point, p.normal)
        if self.ground:
            candidates[2] = self._plane_hits(origin, directions, np.array([0.0, 0.0, -self.ground_height]),
                                             np.array([0.0, 0.0, 1.0]))

        nearest = np.argmin(candidates, axis=0)
        t = candidates[nearest, np.arange(len(directions))]
        kinds = np.array([BOARD, WALL, GROUND])[nearest]
        kinds[~np.isfinite(t)] = MISS
        return t, kinds

    def intensity(self, points: np.ndarray, kinds: np.ndarray) -> np.ndarray:
        """Rendered gray level of each hit point"""
        values = np.full(len(kinds), BACKGROUND_INTENSITY)
        board = kinds == BOARD
        if np.any(board):
            ab = self.board_coordinates(points[board])
            k = 2.0 * np.pi / TEXTURE_WAVELENGTH
            values[board] = TEXTURE_MEAN + TEXTURE_AMPLITUDE * np.sin(k * ab[:, 0]) * np.sin(k * ab[:, 1])
        values[kinds == GROUND] = GROUND_INTENSITY
        return values

    def to_dict(self) -> Dict:
        return {"target": self.target.to_dict(), "placement": self.placement.to_dict(),
                "ground": self.ground, "ground_height": self.ground_height,
                "wall_distance": self.wall_distance}

    def validate(self, lidar: LidarSpec, camera: CameraSpec, gt: RigidTransform) -> None:
        """
        Raise SceneValidationError unless both sensors see the whole target

        Every hole needs two lidar rings crossing it within 90% of the radius; the
        board corners and hole rims must project inside the image with a margin,
        and the board must face both sensors.
        """
        p = self.placement
        if float(p.normal @ (np.zeros(3) - p.center)) <= 0:
            raise SceneValidationError("Board faces away from the lidar", stage="simulator.scene")

        elevations = lidar.elevations()
        limit = HOLE_CHORD_FRACTION * self.target.hole_r
        for label, hole in zip(("tl", "tr", "bl", "br"), self.hole_centers()):
            horizontal = np.hypot(hole[0], hole[1])
            offsets = horizontal * np.tan(elevations) - hole[2]
            crossing = int(np.sum(np.abs(offsets) <= limit))
            if crossing < 2:
                raise SceneValidationError(f"Only {crossing} lidar rings cross hole {label}", stage="simulator.scene")

        to_camera = invert(gt)
        camera_origin = gt.translation
        view = camera_origin - p.center
        cos_view = float(p.normal @ view) / float(np.linalg.norm(view))
        if cos_view <= np.cos(MAX_VIEW_ANGLE):
            raise SceneValidationError("Board is not facing the camera", stage="simulator.scene")

        rim = [c + self.target.hole_r * d for c in self.hole_centers()
               for d in (p.right, -p.right, p.up, -p.up)]
        checked = transform_points(to_camera, np.vstack([self.board_corners(), np.array(rim)]))
        if np.any(checked[:, 0] <= 0.3):
            raise SceneValidationError("Target is behind or too close to the camera", stage="simulator.scene")
        pixels = camera.project(checked)
        inside = ((pixels[:, 0] >= IMAGE_MARGIN) & (pixels[:, 0] <= camera.width - 1 - IMAGE_MARGIN)
                  & (pixels[:, 1] >= IMAGE_MARGIN) & (pixels[:, 1] <= camera.height - 1 - IMAGE_MARGIN))
        if not np.all(inside):
            raise SceneValidationError("Target leaves the camera image", stage="simulator.scene")


def _search_offsets(steps: int):
    yield 0
    for k in range(1, steps + 1):
        yield k
        yield -k


def place_target(target: TargetModel, lidar: LidarSpec, camera: CameraSpec, gt: RigidTransform,
                 distance: float = 2.5, ground: bool = True, ground_height: float = 1.5,
                 wall_distance: Optional[float] = 6.0) -> Scene:
    """
    Put the board ``distance`` meters from the lidar where both sensors see it

    The first candidate sits on the bisector between the lidar heading and the
    camera heading, at the height of the lidar's mid elevation. Nearby heights
    and bearings are then tried in a fixed order until validation passes.
    """
    camera_heading = float(np.arctan2(gt.rotation[1, 0], gt.rotation[0, 0]))
    base_bearing = 0.5 * camera_heading
    base_height = distance * np.tan(lidar.mid_elevation)

    last_error = None
    for j in _search_offsets(SEARCH_STEPS):
        for k in _search_offsets(SEARCH_STEPS):
            placement = TargetPlacement.at(distance, base_bearing + j * BEARING_STEP, base_height + k * HEIGHT_STEP)
            scene = Scene(target, placement, ground, ground_height, wall_distance)
            try:
                scene.validate(lidar, camera, gt)
            except SceneValidationError as e:
                last_error = e
                continue
            logger.debug(f"Target placed at {placement.to_dict()}")
            return scene
    raise SceneValidationError(f"No valid target placement found; last check: {last_error.message}",
                               stage="simulator.scene")


@dataclass(frozen=True)
class SettingSpec:
    setting_id: int
    pose: Pose6
    scene: Scene

    @property
    def transform(self) -> RigidTransform:
        return pose_to_transform(self.pose)


def load_setting(setting_id: int, lidar: Optional[LidarSpec] = None, camera: Optional[CameraSpec] = None,
                 target: Optional[TargetModel] = None, distance: float = 2.5, **scene_options) -> SettingSpec:
    """Ground-truth pose of a simulator setting plus a validated target placement"""
    pose = setting_pose(setting_id)
    scene = place_target(target or TargetModel(), lidar or LidarSpec(), camera or CameraSpec(),
                         pose_to_transform(pose), distance, **scene_options)
    return SettingSpec(int(setting_id), pose, scene)
