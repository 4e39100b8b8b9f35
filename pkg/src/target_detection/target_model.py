from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Optional

import numpy as np

from src.errors import ConfigurationError

CORNER_LABELS = ("tl", "tr", "bl", "br")


@dataclass(frozen=True)
class TargetModel:
    """
    Planar board with four circular holes on a rectangle centered on the board.

    Dimensions in meters. Plane-space coordinates: u to the viewer's right,
    v up, origin at the board center.
    """
    board_w: float = 1.2
    board_h: float = 0.9
    hole_r: float = 0.12
    sep_w: float = 0.5
    sep_h: float = 0.4

    def __post_init__(self):
        if min(self.board_w, self.board_h, self.hole_r, self.sep_w, self.sep_h) <= 0:
            raise ConfigurationError(f"Target dimensions must be positive: {self}")
        if self.sep_w + 2 * self.hole_r >= self.board_w or self.sep_h + 2 * self.hole_r >= self.board_h:
            raise ConfigurationError(f"Holes do not fit inside the board: {self}")
        if min(self.sep_w, self.sep_h) <= 2 * self.hole_r:
            raise ConfigurationError(f"Holes overlap: {self}")

    @classmethod
    def from_config(cls, section: Optional[Dict]) -> "TargetModel":
        section = section or {}
        defaults = cls()
        return cls(**{key: float(section.get(key, getattr(defaults, key)))
                      for key in ("board_w", "board_h", "hole_r", "sep_w", "sep_h")})

    def to_dict(self) -> Dict[str, float]:
        return {"board_w": self.board_w, "board_h": self.board_h, "hole_r": self.hole_r,
                "sep_w": self.sep_w, "sep_h": self.sep_h}

    def hole_centers(self) -> np.ndarray:
        """(4, 2) plane-space centers in tl, tr, bl, br order"""
        hw, hh = self.sep_w / 2.0, self.sep_h / 2.0
        return np.array([[-hw, hh], [hw, hh], [-hw, -hh], [hw, -hh]])

    def expected_distances(self) -> np.ndarray:
        """Sorted multiset of the six pairwise center distances"""
        centers = self.hole_centers()
        return np.sort([np.linalg.norm(a - b) for a, b in combinations(centers, 2)])

    @property
    def circles_span(self) -> float:
        """Horizontal extent covered by the holes"""
        return self.sep_w + 2 * self.hole_r
