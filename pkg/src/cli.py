"""
Command-line entry point: ``python -m src.cli <command> [options]``

Commands:
    simulate   write a synthetic dataset with ground truth
    calibrate  estimate the camera-to-lidar transform from frame files
    evaluate   compare a result file with a ground-truth file
    sweep      run a window / noise / device study and write CSVs
"""

import argparse
import glob
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from src.config import load_config
from src.errors import CalibrationError, DatasetError
from src.registration.calibrator import ExtrinsicCalibrator
from src.simulator.dataset import emit_dataset, load_frames
from src.simulator.scene import load_setting
from src.simulator.specs import CameraSpec, LidarSpec
from src.target_detection.target_model import TargetModel
from src.utils.evaluation_metrics import CalibrationEvaluator
from src.utils.logging_config import setup_logging
from src.utils.monitoring import write_metrics
from src.utils.sweep_runner import SWEEP_KINDS, run_sweep

logger = logging.getLogger(__name__)


def parse_settings(text: str) -> List[int]:
    """'1,3,5-7' -> [1, 3, 5, 6, 7]"""
    settings = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                settings.extend(range(lo, hi + 1))
            elif part:
                settings.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid settings list '{text}'")
    return settings


class CliParser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="src.cli", description="Lidar-stereo extrinsic calibration toolkit")
    parser.add_argument("--config", help="YAML configuration file (defaults are built in)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--json-logs", action="store_true", help="emit log records as JSON lines")
    parser.add_argument("--metrics-out", help="write Prometheus metrics to this file after the command")
    commands = parser.add_subparsers(dest="command", required=True)

    # accepted after the command too; that value wins over the global one
    shared = CliParser(add_help=False)
    shared.add_argument("--config", dest="command_config", help="YAML configuration file for this command")

    simulate = commands.add_parser("simulate", parents=[shared], help="write a synthetic dataset")
    simulate.add_argument("--setting", type=int, required=True, help="simulator setting 1-9")
    simulate.add_argument("--device", help="vlp16 | hdl32 | hdl64 (or 16 | 32 | 64)")
    simulate.add_argument("--frames", type=int, default=30)
    simulate.add_argument("--noise-factor", type=float, default=1.0)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--out", required=True, help="output directory")

    calibrate = commands.add_parser("calibrate", parents=[shared], help="calibrate from frame files")
    calibrate.add_argument("--lidar-glob", required=True, help="e.g. 'data/lidar_*.txt'")
    calibrate.add_argument("--camera-glob", required=True, help="e.g. 'data/camera_*.txt' (PGM siblings required)")
    calibrate.add_argument("--workers", type=int, help="threads for per-frame extraction")
    calibrate.add_argument("--out", required=True, help="result JSON file")

    evaluate = commands.add_parser("evaluate", parents=[shared], help="score a result against ground truth")
    evaluate.add_argument("--result", required=True)
    evaluate.add_argument("--gt", required=True)
    evaluate.add_argument("--out", help="optional JSON report file")

    sweep = commands.add_parser("sweep", parents=[shared], help="run an evaluation sweep")
    sweep.add_argument("--kind", choices=SWEEP_KINDS, required=True)
    sweep.add_argument("--settings", type=parse_settings, default=list(range(1, 10)), help="e.g. '1-9' or '1,7'")
    sweep.add_argument("--seeds", type=int, help="number of seeds (0..n-1)")
    sweep.add_argument("--out", required=True, help="output directory for the CSVs")
    return parser


def _simulate(args, config: Dict) -> None:
    simulator = config.get("simulator", {})
    lidar = LidarSpec.preset(args.device or simulator.get("device", "vlp16"), **simulator.get("lidar", {}))
    camera = CameraSpec.from_config(simulator.get("camera"))
    setting = load_setting(args.setting, lidar, camera, TargetModel.from_config(config.get("target")),
                           float(simulator.get("target_distance", 2.5)),
                           ground=bool(simulator.get("ground", True)),
                           ground_height=float(simulator.get("ground_height", 1.5)),
                           wall_distance=simulator.get("wall_distance", 6.0))
    files = emit_dataset(setting, lidar, camera, args.frames, args.noise_factor, args.seed, args.out)
    print(f"Wrote {len(files.lidar)} lidar and {len(files.camera)} camera frames to {files.root}")


def _expand(pattern: str) -> List[str]:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise DatasetError(f"No files match '{pattern}'", stage="io")
    return paths


def _calibrate(args, config: Dict) -> None:
    if args.workers is not None:
        config.setdefault("registration", {})["workers"] = args.workers
    lidar_frames, camera_frames = load_frames(_expand(args.lidar_glob), _expand(args.camera_glob))
    result = ExtrinsicCalibrator(config).calibrate(lidar_frames, camera_frames)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.to_json())
    print(json.dumps({"pose": result.pose.to_dict(), "rms_residual": result.rms_residual,
                      "frames_used": result.frames_used}, sort_keys=True))


def _evaluate(args, config: Dict) -> None:
    report = CalibrationEvaluator(config.get("evaluation", {})).evaluate_files(args.result, args.gt)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)


def _sweep(args, config: Dict) -> None:
    seeds = args.seeds if args.seeds is not None else int(config.get("evaluation", {}).get("seeds", 3))
    report = run_sweep(args.kind, args.settings, seeds, config, out_dir=args.out)
    print(report.quartiles.to_string(index=False))


HANDLERS = {"simulate": _simulate, "calibrate": _calibrate, "evaluate": _evaluate, "sweep": _sweep}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code (2 on calibration errors)"""
    args = build_parser().parse_args(argv)
    exit_code = 0
    try:
        config = load_config(args.command_config or args.config)
        logging_section = config.get("logging", {})
        setup_logging(args.log_level or logging_section.get("level", "INFO"),
                      args.json_logs or bool(logging_section.get("json", False)))
        logger.debug(f"Running {args.command}")
        HANDLERS[args.command](args, config)
    except CalibrationError as e:
        print(f"error[{e.stage or args.command}]: {e.message}", file=sys.stderr)
        exit_code = 2
    finally:
        if args.metrics_out:
            write_metrics(args.metrics_out)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
