from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraFrame:
    """Left intensity image and the organized cloud it was matched into"""
    image: np.ndarray
    cloud: np.ndarray

    def __post_init__(self):
        image = np.asarray(self.image)
        if image.ndim != 2:
            raise ValueError(f"Intensity image must be 2D, got shape {image.shape}")
        image = np.clip(image, 0, 255).astype(np.uint8)
        cloud = np.asarray(self.cloud, dtype=float)
        if cloud.shape != image.shape + (3,):
            raise ValueError(f"Cloud shape {cloud.shape} does not match image {image.shape}")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "cloud", cloud)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def defined_mask(self) -> np.ndarray:
        """Pixels carrying a 3D point in front of the camera"""
        finite = np.all(np.isfinite(self.cloud), axis=2)
        forward = np.zeros_like(finite)
        forward[finite] = self.cloud[finite][:, 0] > 0
        return forward
