import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Algorithm parameters follow the published defaults; everything else is tuned
# to the simulated point densities.
DEFAULT_CONFIG: Dict[str, Any] = {
    "target": {
        "board_w": 1.2,
        "board_h": 0.9,
        "hole_r": 0.12,
        "sep_w": 0.5,
        "sep_h": 0.4,
    },
    "lidar_pipeline": {
        "passthrough": {"x": [0.5, 5.0], "y": [-4.0, 4.0], "z": [-3.0, 3.0]},
        "plane_threshold": 0.01,
        "inlier_distance": 0.05,
        "vertical_tolerance": 0.55,
        "discontinuity_threshold": 0.5,
        "ring_gate": {"min_points": 2, "max_points": 8, "trim_borders": True, "border_fraction": 0.5},
        "ransac": {"max_iterations": 1000, "min_inliers": 30, "seed": 0},
    },
    "stereo_pipeline": {
        "sobel_threshold": 128,
        "passthrough": {"x": [0.5, 6.0], "y": [-4.0, 4.0], "z": [-3.0, 3.0]},
        "plane_threshold": 0.01,
        "inlier_distance": 0.10,
        "vertical_tolerance": 0.55,
        "remove_border_lines": True,
        "border_lines": {
            "angle_tolerance": 0.1745,
            "span_fraction": 0.8,
            "offset_fraction": 0.1,
            "max_lines": 4,
            "max_attempts": 8,
            "distance_threshold": 0.01,
            "min_inliers": 20,
        },
        "ransac": {"max_iterations": 1000, "min_inliers": 100, "seed": 0},
    },
    "target_detection": {
        "lidar_circle": {"distance_threshold": 0.02, "min_inliers": 3, "max_iterations": 1000},
        "stereo_circle": {"distance_threshold": 0.015, "min_inliers": 15, "max_iterations": 1000},
        "max_attempts": 6,
        "distance_tolerance": 0.03,
        "cluster_tolerance": 0.02,
        "cluster_min_fraction": 0.3,
        "seed": 0,
    },
    "registration": {
        "association": "labels",
        "icp_max_iterations": 100,
        "icp_tolerance": 1e-9,
        "workers": 1,
    },
    "simulator": {
        "device": "vlp16",
        "target_distance": 2.5,
        "wall_distance": 6.0,
        "ground": True,
        "ground_height": 1.5,
        "lidar": {"azimuth_jitter": True},
        "camera": {
            "width": 1280,
            "height": 960,
            "focal_length": 900.0,
            "noise": 0.007,
            "noise_mode": "depth",
            "depth_dependent_noise": False,
            "baseline": 0.12,
        },
    },
    "evaluation": {
        "seeds": 3,
        "windows": [1, 5, 10, 20, 30, 40],
        "noise_factors": [1, 2, 3],
        "devices": [16, 32, 64],
        "frames": 30,
        "noise_factor": 1.0,
        "workers": 1,
    },
    "logging": {"level": "INFO", "json": False},
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Load the YAML configuration on top of the built-in defaults

    Args:
        path: YAML file; ``None`` returns the defaults
        overrides: extra nested values applied last (used by the CLI and sweeps)

    Returns:
        Fully populated configuration dict
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {path}", stage="config")
        try:
            with open(path, "r") as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in {path}: {e}", stage="config") from e
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"Top level of {path} must be a mapping", stage="config")
        config = deep_merge(config, loaded)
        logger.debug(f"Loaded configuration from {path}")
    if overrides:
        config = deep_merge(config, overrides)
    return config
