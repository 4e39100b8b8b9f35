"""
Smoke run of the command line: simulate -> calibrate -> evaluate
"""

import json
import sys
import tempfile
from pathlib import Path

from src.cli import main


def smoke_run(out_dir, setting="7", frames="5"):
    """Run the three commands on one setting and print the errors"""

    out_dir = Path(out_dir)
    data = out_dir / "data"
    result = out_dir / "result.json"
    report = out_dir / "report.json"

    print(f"Smoke run in {out_dir}")

    print(f"\n1. Simulating setting {setting} ({frames} frames)...")
    code = main(["--log-level", "WARNING", "simulate", "--setting", setting, "--frames", frames,
                 "--out", str(data)])
    print(f"   Exit code: {code}")
    if code != 0:
        return code

    print("\n2. Calibrating...")
    code = main(["--log-level", "WARNING", "calibrate",
                 "--lidar-glob", str(data / "lidar_*.txt"),
                 "--camera-glob", str(data / "camera_*.txt"),
                 "--out", str(result)])
    print(f"   Exit code: {code}")
    if code != 0:
        return code

    print("\n3. Evaluating...")
    code = main(["--log-level", "WARNING", "evaluate", "--result", str(result),
                 "--gt", str(data / "ground_truth.json"), "--out", str(report)])
    if code != 0:
        return code
    errors = json.loads(report.read_text())
    print(f"   e_t: {errors['e_t']:.4f} m")
    print(f"   e_r: {errors['e_r']:.4f} rad")

    print("\n✅ Smoke run completed!")
    return 0


if __name__ == "__main__":
    setting = sys.argv[1] if len(sys.argv) > 1 else "7"
    if len(sys.argv) > 2:
        sys.exit(smoke_run(sys.argv[2], setting))
    with tempfile.TemporaryDirectory() as tmp:
        sys.exit(smoke_run(tmp, setting))
