"""
Rigid transforms and the six-parameter extrinsic pose.

Euler convention: fixed axes, roll about x first, then pitch about y, then yaw
about z, i.e. R = Rz(psi) @ Ry(theta) @ Rx(phi). Settings tables are reproduced
with this convention, so changing it changes every ground truth.

Frames are vehicle style (x forward, y left, z up) for both sensors. The reported
calibration maps camera points into the lidar frame: p_l = T_CL p_c.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ORTHONORMAL_TOL = 1e-9
GIMBAL_TOL = 1e-12


def wrap_angle(angle: float) -> float:
    """Map an angle into (-pi, pi]"""
    wrapped = float(np.arctan2(np.sin(angle), np.cos(angle)))
    if wrapped <= -np.pi:
        wrapped = np.pi
    return wrapped


@dataclass(frozen=True)
class Pose6:
    """Extrinsic parameters (t_x, t_y, t_z, phi, theta, psi); meters and radians"""
    t_x: float = 0.0
    t_y: float = 0.0
    t_z: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"Pose components must be finite: {self}")

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_z], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_z, self.phi, self.theta, self.psi], dtype=float)

    def normalized(self) -> "Pose6":
        return Pose6(self.t_x, self.t_y, self.t_z,
                     wrap_angle(self.phi), wrap_angle(self.theta), wrap_angle(self.psi))

    def to_dict(self) -> dict:
        return {"t_x": self.t_x, "t_y": self.t_y, "t_z": self.t_z,
                "phi": self.phi, "theta": self.theta, "psi": self.psi}

    @classmethod
    def from_dict(cls, data: dict) -> "Pose6":
        return cls(*(float(data[k]) for k in ("t_x", "t_y", "t_z", "phi", "theta", "psi")))


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation acting as p -> R p + t"""
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def is_valid(self, tol: float = ORTHONORMAL_TOL) -> bool:
        r = self.rotation
        return (np.allclose(r.T @ r, np.eye(3), atol=tol)
                and abs(np.linalg.det(r) - 1.0) <= tol
                and bool(np.all(np.isfinite(self.translation))))

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix"""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pose_to_transform(pose: Pose6) -> RigidTransform:
    """R = Rz(psi) Ry(theta) Rx(phi); t = (t_x, t_y, t_z)"""
    rotation = rot_z(pose.psi) @ rot_y(pose.theta) @ rot_x(pose.phi)
    return RigidTransform(rotation, pose.translation)


def transform_to_pose(transform: RigidTransform) -> Pose6:
    """
    Inverse of pose_to_transform, with theta taken on the [-pi/2, pi/2] branch.

    At gimbal lock (|theta| = pi/2) roll is fixed to 0 and yaw absorbs the
    remaining rotation about the vertical axis.
    """
    r = transform.rotation
    cos_theta = float(np.hypot(r[0, 0], r[1, 0]))
    theta = float(np.arctan2(-r[2, 0], cos_theta))
    if cos_theta > GIMBAL_TOL:
        phi = float(np.arctan2(r[2, 1], r[2, 2]))
        psi = float(np.arctan2(r[1, 0], r[0, 0]))
    else:
        phi = 0.0
        psi = float(np.arctan2(-r[0, 1], r[1, 1]))
    t = transform.translation
    return Pose6(float(t[0]), float(t[1]), float(t[2]),
                 wrap_angle(phi), theta, wrap_angle(psi))


def apply(transform: RigidTransform, point: Sequence[float]) -> np.ndarray:
    """R p + t for a single point"""
    return transform.rotation @ np.asarray(point, dtype=float) + transform.translation


def transform_points(transform: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Vectorized apply over an (N, 3) array"""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return points @ transform.rotation.T + transform.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``b`` first, then ``a``"""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(transform: RigidTransform) -> RigidTransform:
    rt = transform.rotation.T
    return RigidTransform(rt, -rt @ transform.translation)


def rotation_angle(rotation: np.ndarray) -> float:
    """
    Geodesic angle of a rotation matrix in [0, pi].

    Equals arccos((trace - 1) / 2); evaluated through atan2 of the sine and
    cosine parts so small angles keep full precision.
    """
    r = np.asarray(rotation, dtype=float)
    cos_part = (np.trace(r) - 1.0) / 2.0
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    sin_part = np.linalg.norm(skew) / 2.0
    angle = float(np.arctan2(sin_part, np.clip(cos_part, -1.0, 1.0)))
    return float(np.clip(angle, 0.0, np.pi))

