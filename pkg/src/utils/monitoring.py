from prometheus_client import Counter, Histogram, Gauge, generate_latest
import time
from functools import wraps
from pathlib import Path
import logging

logger = logging.getLogger(__name__)

# Define metrics
calibration_runs = Counter(
    'extrinsic_calibration_runs_total',
    'Total number of calibration runs',
    ['status']
)

calibration_duration = Histogram(
    'extrinsic_calibration_duration_seconds',
    'Time spent in a full calibration run',
    buckets=[0.5, 1, 5, 10, 30, 60, 120, 300]
)

frames_processed = Counter(
    'extrinsic_calibration_frames_total',
    'Frames pushed through a sensor pipeline',
    ['sensor', 'outcome']
)

frames_simulated = Counter(
    'simulator_frames_total',
    'Frames produced by the sensor simulator',
    ['sensor']
)

calibration_residual = Histogram(
    'extrinsic_calibration_rms_residual_meters',
    'RMS distance between registered reference points',
    buckets=[0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1]
)

active_cells = Gauge(
    'sweep_active_cells',
    'Number of sweep cells currently running'
)


def monitor_calibration(func):
    """Decorator to monitor calibration runs"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()

        try:
            result = func(*args, **kwargs)
            calibration_runs.labels(status='success').inc()
            calibration_residual.observe(result.rms_residual)
            return result
        except Exception:
            calibration_runs.labels(status='failed').inc()
            raise
        finally:
            duration = time.time() - start_time
            calibration_duration.observe(duration)

    return wrapper


def track_active_cells(func):
    """Decorator to track running sweep cells"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        active_cells.inc()
        try:
            return func(*args, **kwargs)
        finally:
            active_cells.dec()

    return wrapper


def write_metrics(path) -> None:
    """Dump the Prometheus text exposition of every metric to ``path``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(generate_latest())
    logger.info(f"Metrics written to {path}")
