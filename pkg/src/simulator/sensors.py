import logging
from typing import List, Tuple, Union

import numpy as np

from src.geometry.transforms import RigidTransform
from src.lidar_pipeline.lidar_frame import LidarFrame
from src.simulator.scene import BOARD, Scene, SettingSpec
from src.simulator.specs import CameraSpec, LidarSpec
from src.stereo_pipeline.camera_frame import CameraFrame
from src.utils.monitoring import frames_simulated

logger = logging.getLogger(__name__)

SENSOR_CODES = {"lidar": 0, "camera": 1}
SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def frame_rng(seed: int, frame_index: int, sensor: str) -> np.random.Generator:
    """Independent stream per (master seed, frame, sensor), whatever the call order"""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(frame_index), SENSOR_CODES[sensor]]))


def simulate_lidar(scene: Scene, spec: LidarSpec, noise_factor: float = 0.0,
                   seed: SeedLike = 0) -> LidarFrame:
    """
    One revolution of the lidar at the origin of the scene frame

    Rays are cast per (layer, azimuth); misses and returns beyond max range are
    dropped. Range noise N(0, (K sigma_l)^2) is applied along each ray.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    offset = rng.uniform(0.0, spec.azimuth_step) if spec.azimuth_jitter else 0.0
    elevation, azimuth = np.meshgrid(spec.elevations(), spec.azimuths(offset), indexing='ij')
    directions = np.stack([np.cos(elevation) * np.cos(azimuth),
                           np.cos(elevation) * np.sin(azimuth),
                           np.sin(elevation)], axis=-1).reshape(-1, 3)
    rings = np.repeat(np.arange(spec.layers), elevation.shape[1])

    t, kinds = scene.intersect(np.zeros(3), directions)
    hit = np.isfinite(t) & (t <= spec.max_range)
    ranges = t[hit]
    intensity = scene.intensity(directions[hit] * ranges[:, None], kinds[hit])
    if noise_factor > 0:
        ranges = ranges + rng.normal(0.0, noise_factor * spec.range_noise, size=len(ranges))

    frames_simulated.labels(sensor='lidar').inc()
    return LidarFrame.from_points(directions[hit] * ranges[:, None], rings[hit], np.round(intensity))


def simulate_stereo(scene: Scene, spec: CameraSpec, gt: RigidTransform, noise_factor: float = 0.0,
                    seed: SeedLike = 0) -> CameraFrame:
    """
    Render the left image and its organized cloud from the camera pose ``gt``

    ``gt`` maps camera points into the scene (lidar) frame. The cloud is in the
    camera frame; pixels without a hit within ``max_depth`` are NaN.

    In ``depth`` noise mode each defined point moves along its ray by
    N(0, (K sigma_c)^2), or by K sigma_c z^2 / (f b) when depth-dependent noise is
    on. In ``intensity`` mode the gray levels get N(0, (K sigma_c 255)^2) instead.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rays = spec.pixel_rays().reshape(-1, 3)
    directions = rays @ gt.rotation.T
    t, kinds = scene.intersect(gt.translation, directions)
    valid = np.isfinite(t) & (t <= spec.max_depth)

    safe_t = np.where(np.isfinite(t), t, 0.0)
    intensity = scene.intensity(gt.translation + directions * safe_t[:, None], kinds)

    depth = t.copy()
    if noise_factor > 0 and spec.noise_mode == "depth":
        sigma = noise_factor * spec.depth_noise
        if spec.depth_dependent_noise:
            sigma = sigma * depth[valid] ** 2 / (spec.focal_length * spec.baseline)
        depth[valid] = depth[valid] + rng.normal(0.0, 1.0, size=int(valid.sum())) * sigma
    elif noise_factor > 0 and spec.noise_mode == "intensity":
        intensity = intensity + rng.normal(0.0, noise_factor * spec.depth_noise * 255.0, size=len(intensity))

    cloud = np.full((len(rays), 3), np.nan)
    cloud[valid] = rays[valid] * depth[valid, None]
    image = np.clip(np.floor(intensity + 0.5), 0, 255).astype(np.uint8)

    logger.debug(f"Rendered {int(valid.sum())} defined pixels, {int(np.sum(kinds == BOARD))} on the board")
    frames_simulated.labels(sensor='camera').inc()
    return CameraFrame(image.reshape(spec.height, spec.width), cloud.reshape(spec.height, spec.width, 3))


def simulate_frames(setting: SettingSpec, lidar: LidarSpec, camera: CameraSpec, frames: int,
                    noise_factor: float = 0.0, seed: int = 0) -> Tuple[List[LidarFrame], List[CameraFrame]]:
    """``frames`` synchronized frame pairs of a static setting"""
    gt = setting.transform
    lidar_frames, camera_frames = [], []
    for index in range(frames):
        lidar_frames.append(simulate_lidar(setting.scene, lidar, noise_factor, frame_rng(seed, index, 'lidar')))
        camera_frames.append(simulate_stereo(setting.scene, camera, gt, noise_factor,
                                             frame_rng(seed, index, 'camera')))
    return lidar_frames, camera_frames
