"""
Readers and writers for the on-disk frame formats.

Point clouds are plain text: a ``# x y z ring intensity`` header, then one point
per line with ring and intensity set to -1 when not applicable. Organized stereo
clouds add a ``# width W height H`` header line and hold one row per pixel in
row-major order, undefined pixels written as ``nan``. Intensity images are 8-bit
binary PGM files.
"""

import logging
import re
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from src.errors import DatasetError
from src.lidar_pipeline.lidar_frame import LidarFrame
from src.stereo_pipeline.camera_frame import CameraFrame

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
COLUMNS = ["x", "y", "z", "ring", "intensity"]
HEADER = "x y z ring intensity"
FORMATS = ["%.6f", "%.6f", "%.6f", "%d", "%d"]
SIZE_PATTERN = re.compile(r"#\s*width\s+(\d+)\s+height\s+(\d+)")


def _table(points: np.ndarray, rings: Optional[np.ndarray], intensity: Optional[np.ndarray]) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    rings = np.full(n, -1) if rings is None else np.asarray(rings).reshape(n)
    intensity = np.full(n, -1) if intensity is None else np.rint(np.asarray(intensity, dtype=float)).reshape(n)
    return np.column_stack([points, rings, intensity])


def write_point_cloud(path: PathLike, points: np.ndarray, rings: Optional[np.ndarray] = None,
                      intensity: Optional[np.ndarray] = None, size: Optional[Tuple[int, int]] = None) -> Path:
    """Write points (and optional per-point ring / intensity); ``size`` = (width, height) marks an organized cloud"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = HEADER if size is None else f"{HEADER}\nwidth {size[0]} height {size[1]}"
    try:
        np.savetxt(path, _table(points, rings, intensity), fmt=FORMATS, header=header, comments="# ")
    except OSError as e:
        raise DatasetError(f"Cannot write point cloud {path}: {e}", stage="io") from e
    return path


def _read_size(path: Path) -> Optional[Tuple[int, int]]:
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                return None
            match = SIZE_PATTERN.match(line.strip())
            if match:
                return int(match.group(1)), int(match.group(2))
    return None


def read_point_cloud(path: PathLike) -> pd.DataFrame:
    """Columns x, y, z, ring, intensity; NaN rows of organized clouds are kept"""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Point cloud file not found: {path}", stage="io")
    try:
        table = pd.read_csv(path, sep=r"\s+", comment="#", header=None, names=COLUMNS)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=COLUMNS, dtype=float)
    except (ValueError, pd.errors.ParserError) as e:
        raise DatasetError(f"Malformed point cloud {path}: {e}", stage="io") from e
    return table.astype(float)


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(path, format="PPM")
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Image file not found: {path}", stage="io")
    with Image.open(path) as image:
        return np.array(image.convert("L"), dtype=np.uint8)


def write_lidar_frame(path: PathLike, frame: LidarFrame) -> Path:
    return write_point_cloud(path, frame.points, frame.rings, frame.intensity)


def read_lidar_frame(path: PathLike) -> LidarFrame:
    table = read_point_cloud(path)
    table = table.dropna(subset=["x", "y", "z"])
    if (table["ring"] < 0).any():
        raise DatasetError(f"Lidar file {path} has points without a ring index", stage="io")
    intensity = table["intensity"].to_numpy()
    return LidarFrame.from_points(table[["x", "y", "z"]].to_numpy(), table["ring"].to_numpy().astype(int),
                                  None if np.all(intensity < 0) else intensity)


def write_camera_frame(cloud_path: PathLike, image_path: PathLike, frame: CameraFrame) -> Tuple[Path, Path]:
    cloud_path = write_point_cloud(cloud_path, frame.cloud.reshape(-1, 3), None, frame.image.reshape(-1),
                                   size=(frame.width, frame.height))
    return cloud_path, write_pgm(image_path, frame.image)


def read_camera_frame(cloud_path: PathLike, image_path: PathLike) -> CameraFrame:
    cloud_path = Path(cloud_path)
    size = _read_size(cloud_path) if cloud_path.exists() else None
    if size is None:
        raise DatasetError(f"{cloud_path} is not an organized cloud (missing width/height header)", stage="io")
    width, height = size
    table = read_point_cloud(cloud_path)
    if len(table) != width * height:
        raise DatasetError(f"{cloud_path} has {len(table)} rows for a {width}x{height} cloud", stage="io")
    image = read_pgm(image_path)
    if image.shape != (height, width):
        raise DatasetError(f"Image {image_path} is {image.shape}, cloud is {height}x{width}", stage="io")
    return CameraFrame(image, table[["x", "y", "z"]].to_numpy().reshape(height, width, 3))
