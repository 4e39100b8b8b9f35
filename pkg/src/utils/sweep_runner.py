import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import CalibrationError, ConfigurationError
from src.registration.calibrator import ExtrinsicCalibrator
from src.simulator.scene import load_setting
from src.simulator.sensors import simulate_frames
from src.simulator.specs import CameraSpec, LidarSpec
from src.utils.evaluation_metrics import rotation_error, translation_error
from src.utils.monitoring import track_active_cells

logger = logging.getLogger(__name__)

SWEEP_KINDS = ("window", "noise", "device")
CSV_COLUMNS = ["sweep", "cell", "seed", "setting", "e_t", "e_r", "frames_used"]
FLOAT_FORMAT = "%.6f"


@dataclass
class SweepReport:
    """Raw per-run errors of one sweep plus per-cell quartiles"""
    kind: str
    rows: pd.DataFrame

    @property
    def quartiles(self) -> pd.DataFrame:
        grouped = self.rows.groupby(["sweep", "cell"], sort=False)
        summary = grouped.agg(
            runs=("seed", "size"),
            failures=("e_t", lambda s: int(s.isna().sum())),
            e_t_q1=("e_t", lambda s: s.quantile(0.25)),
            e_t_median=("e_t", "median"),
            e_t_q3=("e_t", lambda s: s.quantile(0.75)),
            e_r_q1=("e_r", lambda s: s.quantile(0.25)),
            e_r_median=("e_r", "median"),
            e_r_q3=("e_r", lambda s: s.quantile(0.75)),
        )
        return summary.reset_index()

    def cell_values(self, cell: str, column: str = "e_t") -> np.ndarray:
        return self.rows.loc[self.rows["cell"] == cell, column].to_numpy(dtype=float)

    def write(self, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        raw_path = out_dir / f"sweep_{self.kind}.csv"
        quartile_path = out_dir / f"sweep_{self.kind}_quartiles.csv"
        self.rows.to_csv(raw_path, index=False, float_format=FLOAT_FORMAT)
        self.quartiles.to_csv(quartile_path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Sweep '{self.kind}' written to {raw_path} and {quartile_path}")
        return raw_path, quartile_path


def _lidar_spec(device: Union[str, int], simulator: Dict) -> LidarSpec:
    return LidarSpec.preset(device, **simulator.get('lidar', {}))


class SweepRunner:
    """Simulate-calibrate-evaluate loops over one experimental axis"""

    def __init__(self, config: Dict):
        self.config = config or {}
        self.logger = logging.getLogger(__name__)
        self.calibrator = ExtrinsicCalibrator(self.config)
        self.target = self.calibrator.target

        simulator = self.config.get('simulator', {})
        self.simulator = simulator
        self.device = simulator.get('device', 'vlp16')
        self.camera = CameraSpec.from_config(simulator.get('camera'))
        self.scene_options = {
            'ground': bool(simulator.get('ground', True)),
            'ground_height': float(simulator.get('ground_height', 1.5)),
            'wall_distance': simulator.get('wall_distance', 6.0),
        }
        self.distance = float(simulator.get('target_distance', 2.5))

        evaluation = self.config.get('evaluation', {})
        self.windows = [int(n) for n in evaluation.get('windows', [1, 5, 10, 20, 30, 40])]
        self.noise_factors = [float(k) for k in evaluation.get('noise_factors', [1, 2, 3])]
        self.devices = [str(d) for d in evaluation.get('devices', [16, 32, 64])]
        self.frames = int(evaluation.get('frames', 30))
        self.noise_factor = float(evaluation.get('noise_factor', 1.0))
        self.workers = max(1, int(evaluation.get('workers', 1)))

    def _jobs(self, kind: str, settings: Sequence[int], seeds: Sequence[int]) -> List[Tuple]:
        """(setting, seed, device, noise factor, windows) per independent simulation"""
        jobs = []
        for setting in settings:
            for seed in seeds:
                if kind == "window":
                    jobs.append((setting, seed, self.device, self.noise_factor, self.windows))
                elif kind == "noise":
                    for k in self.noise_factors:
                        jobs.append((setting, seed, self.device, k, [self.frames]))
                else:
                    for device in self.devices:
                        jobs.append((setting, seed, device, self.noise_factor, [self.frames]))
        return jobs

    @track_active_cells
    def _run_job(self, kind: str, job: Tuple) -> List[Dict]:
        setting_id, seed, device, noise_factor, windows = job
        lidar = _lidar_spec(device, self.simulator)
        rows = []
        try:
            setting = load_setting(setting_id, lidar, self.camera, self.target, self.distance, **self.scene_options)
            lidar_frames, camera_frames = simulate_frames(setting, lidar, self.camera, max(windows), noise_factor, seed)
        except CalibrationError as e:
            self.logger.warning(f"Setting {setting_id} seed {seed}: simulation failed: {e}")
            setting, lidar_frames = None, []

        for n in windows:
            cell = {"window": f"N={n}", "noise": f"K={noise_factor:g}", "device": f"layers={lidar.layers}"}[kind]
            row = {"sweep": kind, "cell": cell, "seed": seed, "setting": setting_id,
                   "e_t": np.nan, "e_r": np.nan, "frames_used": 0}
            if setting is not None:
                try:
                    result = self.calibrator.calibrate(lidar_frames[:n], camera_frames[:n])
                    row.update(e_t=translation_error(result.pose, setting.pose),
                               e_r=rotation_error(result.pose, setting.pose),
                               frames_used=result.frames_used)
                except CalibrationError as e:
                    self.logger.warning(f"{kind} {cell} setting {setting_id} seed {seed}: {e}")
            rows.append(row)
        return rows

    def run(self, kind: str, settings: Sequence[int], seeds: Iterable[int]) -> SweepReport:
        """
        Run one sweep

        Args:
            kind: ``window`` (N over the configured windows), ``noise`` (K at N
                frames) or ``device`` (lidar layer count at N frames)
            settings: simulator setting ids
            seeds: master seeds, one run per seed and cell

        Returns:
            SweepReport; failed runs appear with missing errors
        """
        if kind not in SWEEP_KINDS:
            raise ConfigurationError(f"Unknown sweep kind '{kind}', expected one of {SWEEP_KINDS}", stage="sweep")
        jobs = self._jobs(kind, list(settings), list(seeds))
        self.logger.info(f"Sweep '{kind}': {len(jobs)} simulations")

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                batches = list(pool.map(lambda job: self._run_job(kind, job), jobs))
        else:
            batches = [self._run_job(kind, job) for job in jobs]

        rows = pd.DataFrame([row for batch in batches for row in batch], columns=CSV_COLUMNS)
        return SweepReport(kind, rows)


def run_sweep(kind: str, settings: Sequence[int], seeds: Union[int, Iterable[int]], config: Dict,
              out_dir: Optional[Union[str, Path]] = None) -> SweepReport:
    """Run a sweep; an integer ``seeds`` means seeds 0..seeds-1. Writes CSVs when ``out_dir`` is given"""
    seed_list = range(seeds) if isinstance(seeds, int) else seeds
    report = SweepRunner(config).run(kind, settings, seed_list)
    if out_dir is not None:
        report.write(out_dir)
    return report
