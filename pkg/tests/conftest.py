"""
Shared fixtures. The default suite renders at 800x600 with a 600 px focal
length: same field of view as the full camera, and the board texture still
stays under the Sobel gate.
"""

import numpy as np
import pytest

from src.config import load_config
from src.simulator.scene import load_setting
from src.simulator.sensors import simulate_frames
from src.simulator.specs import CameraSpec, LidarSpec
from src.target_detection.target_model import TargetModel

SMALL_CAMERA = {"width": 800, "height": 600, "focal_length": 600.0}


@pytest.fixture(scope="session")
def target():
    return TargetModel()


@pytest.fixture(scope="session")
def small_camera():
    return CameraSpec(width=800, height=600, focal_length=600.0)


@pytest.fixture(scope="session")
def vlp16():
    return LidarSpec.preset("vlp16")


@pytest.fixture(scope="session")
def steady_vlp16():
    """No start-azimuth jitter: exact, repeatable ray directions"""
    return LidarSpec.preset("vlp16", azimuth_jitter=False)


@pytest.fixture
def config():
    return load_config(overrides={"simulator": {"camera": dict(SMALL_CAMERA)}})


@pytest.fixture(scope="session")
def setting7(vlp16, small_camera):
    return load_setting(7, vlp16, small_camera)


@pytest.fixture(scope="session")
def setting7_frames(setting7, vlp16, small_camera):
    """Three noiseless frame pairs of the identity setting"""
    return simulate_frames(setting7, vlp16, small_camera, 3, noise_factor=0.0, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def random_rotation():
    """Factory for uniform random rotation matrices (QR of a Gaussian matrix, sign-fixed)"""
    def draw(rng: np.random.Generator) -> np.ndarray:
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q = q @ np.diag(np.sign(np.diag(r)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return q
    return draw
