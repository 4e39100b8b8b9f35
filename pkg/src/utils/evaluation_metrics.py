import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from src.errors import DatasetError, DirectionMismatch
from src.geometry.transforms import Pose6, pose_to_transform, rotation_angle

DIRECTION = "camera_to_lidar"


@dataclass(frozen=True)
class ErrorPair:
    """Linear and angular calibration error"""
    e_t: float
    e_r: float

    def __post_init__(self):
        if self.e_t < 0 or not 0 <= self.e_r <= np.pi:
            raise ValueError(f"Invalid error pair: {self}")

    def to_dict(self) -> Dict[str, float]:
        return {"e_t": self.e_t, "e_r": self.e_r}


def _check_direction(est_direction: str, gt_direction: str) -> None:
    if est_direction != gt_direction:
        raise DirectionMismatch(
            f"Estimate is '{est_direction}' but ground truth is '{gt_direction}'", stage="evaluate"
        )


def translation_error(est: Pose6, gt: Pose6, est_direction: str = DIRECTION,
                      gt_direction: str = DIRECTION) -> float:
    """e_t = ||t - t_g||"""
    _check_direction(est_direction, gt_direction)
    return float(np.linalg.norm(est.translation - gt.translation))


def rotation_error(est: Pose6, gt: Pose6, est_direction: str = DIRECTION,
                   gt_direction: str = DIRECTION) -> float:
    """e_r = angle(R^-1 R_g)"""
    _check_direction(est_direction, gt_direction)
    r_est = pose_to_transform(est).rotation
    r_gt = pose_to_transform(gt).rotation
    return rotation_angle(r_est.T @ r_gt)


class CalibrationEvaluator:
    """Scores calibration results against simulator ground truth"""

    def __init__(self, config: Dict = None):
        self.config = config or {}
        self.logger = logging.getLogger(__name__)

    def evaluate(self, est: Pose6, gt: Pose6, est_direction: str = DIRECTION,
                 gt_direction: str = DIRECTION) -> ErrorPair:
        pair = ErrorPair(translation_error(est, gt, est_direction, gt_direction),
                         rotation_error(est, gt, est_direction, gt_direction))
        self.logger.info(f"e_t = {pair.e_t:.5f} m, e_r = {pair.e_r:.5f} rad")
        return pair

    def evaluate_files(self, result_path: Union[str, Path], gt_path: Union[str, Path]) -> Dict[str, Any]:
        """
        Compare a calibration result file with a ground-truth file

        Both files carry a direction tag; they must agree.

        Returns:
            Report with both poses and the error pair
        """
        result = self._load(result_path)
        truth = self._load(gt_path)
        try:
            est, gt = Pose6.from_dict(result["pose"]), Pose6.from_dict(truth["pose"])
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"Missing or malformed pose: {e}", stage="evaluate") from e
        pair = self.evaluate(est, gt, result.get("direction", ""), truth.get("direction", ""))
        return {
            "direction": truth.get("direction"),
            "estimate": est.to_dict(),
            "ground_truth": gt.to_dict(),
            "frames_used": result.get("frames_used"),
            **pair.to_dict(),
        }

    @staticmethod
    def _load(path: Union[str, Path]) -> Dict[str, Any]:
        path = Path(path)
        try:
            return json.loads(path.read_text())
        except FileNotFoundError as e:
            raise DatasetError(f"File not found: {path}", stage="evaluate") from e
        except json.JSONDecodeError as e:
            raise DatasetError(f"Invalid JSON in {path}: {e}", stage="evaluate") from e
