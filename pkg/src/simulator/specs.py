from dataclasses import asdict, dataclass
from typing import Dict, Optional, Union

import numpy as np

from src.errors import ConfigurationError, UnknownSetting
from src.geometry.transforms import Pose6

NOISE_MODES = ("depth", "intensity")
# nominal per-sensor standard deviations, scaled by the noise factor K
LIDAR_SIGMA = 0.008
CAMERA_SIGMA = 0.007


@dataclass(frozen=True)
class LidarSpec:
    """Spinning multi-layer lidar; ring 0 is the lowest layer"""
    layers: int = 16
    elevation_min: float = -15.0
    elevation_max: float = 15.0
    azimuth_step: float = 0.2
    range_noise: float = LIDAR_SIGMA
    max_range: float = 100.0
    azimuth_jitter: bool = True

    def __post_init__(self):
        if self.layers < 2:
            raise ConfigurationError(f"Lidar needs at least 2 layers, got {self.layers}")
        if not self.azimuth_step > 0:
            raise ConfigurationError(f"Azimuth step must be > 0, got {self.azimuth_step}")
        if not self.elevation_min < self.elevation_max:
            raise ConfigurationError("Lidar elevation range is empty")
        if not self.max_range > 0:
            raise ConfigurationError(f"Max range must be > 0, got {self.max_range}")

    def elevations(self) -> np.ndarray:
        """Per-ring elevation angles in radians, ascending"""
        return np.deg2rad(np.linspace(self.elevation_min, self.elevation_max, self.layers))

    def azimuths(self, offset: float = 0.0) -> np.ndarray:
        count = int(round(360.0 / self.azimuth_step))
        return np.deg2rad(offset + self.azimuth_step * np.arange(count)) - np.pi

    @property
    def mid_elevation(self) -> float:
        return float(np.deg2rad(0.5 * (self.elevation_min + self.elevation_max)))

    @classmethod
    def preset(cls, device: Union[str, int], **overrides) -> "LidarSpec":
        key = str(device).lower()
        if key not in LIDAR_PRESETS:
            raise ConfigurationError(f"Unknown lidar device '{device}', expected one of {sorted(LIDAR_PRESETS)}")
        return cls(**{**LIDAR_PRESETS[key], **overrides})

    def to_dict(self) -> Dict:
        return asdict(self)


LIDAR_PRESETS: Dict[str, Dict] = {
    "vlp16": {"layers": 16, "elevation_min": -15.0, "elevation_max": 15.0, "azimuth_step": 0.2},
    "hdl32": {"layers": 32, "elevation_min": -20.0, "elevation_max": 20.0, "azimuth_step": 0.2},
    "hdl64": {"layers": 64, "elevation_min": -24.8, "elevation_max": 2.0, "azimuth_step": 0.17},
}
LIDAR_PRESETS["16"] = LIDAR_PRESETS["vlp16"]
LIDAR_PRESETS["32"] = LIDAR_PRESETS["hdl32"]
LIDAR_PRESETS["64"] = LIDAR_PRESETS["hdl64"]


@dataclass(frozen=True)
class CameraSpec:
    """Rectified left camera of the stereo pair, pinhole without distortion"""
    width: int = 1280
    height: int = 960
    focal_length: float = 900.0
    depth_noise: float = CAMERA_SIGMA
    noise_mode: str = "depth"
    depth_dependent_noise: bool = False
    baseline: float = 0.12
    max_depth: float = 20.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or not self.focal_length > 0:
            raise ConfigurationError(f"Camera dimensions and focal length must be positive: {self}")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigurationError(f"Unknown noise mode '{self.noise_mode}', expected one of {NOISE_MODES}")
        if not self.baseline > 0:
            raise ConfigurationError(f"Stereo baseline must be > 0, got {self.baseline}")

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    def project(self, points_c: np.ndarray) -> np.ndarray:
        """(N, 2) pixel (col, row) of camera-frame points with x forward"""
        points_c = np.asarray(points_c, dtype=float).reshape(-1, 3)
        x = points_c[:, 0]
        cols = self.cx - self.focal_length * points_c[:, 1] / x
        rows = self.cy - self.focal_length * points_c[:, 2] / x
        return np.stack([cols, rows], axis=1)

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) ray directions with unit forward component, so ray depth = hit parameter"""
        rows, cols = np.mgrid[0:self.height, 0:self.width].astype(float)
        return np.stack([np.ones_like(rows),
                         -(cols - self.cx) / self.focal_length,
                         -(rows - self.cy) / self.focal_length], axis=2)

    @classmethod
    def from_config(cls, section: Optional[Dict]) -> "CameraSpec":
        section = section or {}
        return cls(
            width=int(section.get("width", 1280)),
            height=int(section.get("height", 960)),
            focal_length=float(section.get("focal_length", 900.0)),
            depth_noise=float(section.get("noise", CAMERA_SIGMA)),
            noise_mode=str(section.get("noise_mode", "depth")),
            depth_dependent_noise=bool(section.get("depth_dependent_noise", False)),
            baseline=float(section.get("baseline", 0.12)),
            max_depth=float(section.get("max_depth", 20.0)),
        )

    def to_dict(self) -> Dict:
        return asdict(self)


# Camera-to-lidar ground truth per simulator setting
SETTINGS: Dict[int, Pose6] = {
    1: Pose6(t_x=-0.8, t_y=-0.1, t_z=0.4),
    2: Pose6(psi=0.5),
    3: Pose6(phi=0.2, theta=0.1, psi=0.3),
    4: Pose6(t_x=-0.3, t_y=0.2, t_z=-0.2, phi=0.2, theta=-0.1, psi=0.3),
    5: Pose6(theta=0.1),
    6: Pose6(phi=0.4),
    7: Pose6(),
    8: Pose6(t_x=-0.128, t_y=0.418, t_z=-0.314, phi=0.110, theta=-0.299, psi=-0.103),
    9: Pose6(t_x=-0.433, t_y=0.845, t_z=1.108, phi=0.075, theta=0.258, psi=-0.672),
}


def setting_pose(setting_id: int) -> Pose6:
    try:
        return SETTINGS[int(setting_id)]
    except (KeyError, TypeError, ValueError):
        raise UnknownSetting(f"Setting {setting_id} does not exist; valid ids are 1-9", stage="simulator")
