import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.errors import DatasetError
from src.lidar_pipeline.lidar_frame import LidarFrame
from src.simulator.scene import SettingSpec
from src.simulator.sensors import frame_rng, simulate_lidar, simulate_stereo
from src.simulator.specs import CameraSpec, LidarSpec
from src.stereo_pipeline.camera_frame import CameraFrame
from src.utils.cloud_io import read_camera_frame, read_lidar_frame, write_camera_frame, write_lidar_frame

logger = logging.getLogger(__name__)

GROUND_TRUTH_FILE = "ground_truth.json"
DIRECTION = "camera_to_lidar"


@dataclass
class DatasetFiles:
    root: Path
    lidar: List[Path] = field(default_factory=list)
    camera: List[Tuple[Path, Path]] = field(default_factory=list)
    ground_truth: Optional[Path] = None


def ground_truth_record(setting: SettingSpec, lidar: LidarSpec, camera: CameraSpec, frames: int,
                        noise_factor: float, seed: int) -> Dict:
    return {
        "direction": DIRECTION,
        "setting": setting.setting_id,
        "pose": setting.pose.to_dict(),
        "matrix": setting.transform.as_matrix().tolist(),
        "scene": setting.scene.to_dict(),
        "hole_centers_lidar": setting.scene.hole_centers().tolist(),
        "lidar_spec": lidar.to_dict(),
        "camera_spec": camera.to_dict(),
        "frames": int(frames),
        "noise_factor": float(noise_factor),
        "seed": int(seed),
    }


def emit_dataset(setting: SettingSpec, lidar: LidarSpec, camera: CameraSpec, frames: int,
                 noise_factor: float, seed: int, out_dir: Union[str, Path]) -> DatasetFiles:
    """
    Simulate ``frames`` frame pairs and write them with their ground truth

    Files: ``lidar_NNNN.txt``, ``camera_NNNN.txt`` + ``camera_NNNN.pgm`` and
    ``ground_truth.json``. Each frame draws from its own seed stream derived from
    ``seed``, so reruns are byte-identical.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"Cannot create output directory {out_dir}: {e}", stage="io") from e

    files = DatasetFiles(out_dir)
    gt = setting.transform
    for index in range(frames):
        lidar_frame = simulate_lidar(setting.scene, lidar, noise_factor, frame_rng(seed, index, 'lidar'))
        files.lidar.append(write_lidar_frame(out_dir / f"lidar_{index:04d}.txt", lidar_frame))
        camera_frame = simulate_stereo(setting.scene, camera, gt, noise_factor, frame_rng(seed, index, 'camera'))
        files.camera.append(write_camera_frame(out_dir / f"camera_{index:04d}.txt",
                                               out_dir / f"camera_{index:04d}.pgm", camera_frame))
        logger.debug(f"Wrote frame pair {index}")

    files.ground_truth = out_dir / GROUND_TRUTH_FILE
    record = ground_truth_record(setting, lidar, camera, frames, noise_factor, seed)
    files.ground_truth.write_text(json.dumps(record, indent=2, sort_keys=True))
    logger.info(f"Setting {setting.setting_id}: {frames} frame pairs written to {out_dir}")
    return files


def load_frames(lidar_paths: Sequence[Union[str, Path]],
                camera_paths: Sequence[Union[str, Path]]) -> Tuple[List[LidarFrame], List[CameraFrame]]:
    """Read lidar files and organized camera clouds; each cloud's image is its ``.pgm`` sibling"""
    lidar_frames = [read_lidar_frame(p) for p in sorted(map(Path, lidar_paths))]
    camera_frames = [read_camera_frame(p, p.with_suffix(".pgm")) for p in sorted(map(Path, camera_paths))]
    return lidar_frames, camera_frames
