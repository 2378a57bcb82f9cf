"""
The command-line workflow
=========================

simulate -> calibrate -> fuse -> eval -> localize, then the same run as a
single ``pipeline`` call.  Everything lands in a scratch directory.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def cli(*args):
    cmd = [sys.executable, "-m", "lae_ensemble", *map(str, args)]
    print("$ lae-ensemble", args[0], "...", flush=True)
    subprocess.run(cmd, check=True)


work = Path(tempfile.mkdtemp(prefix="lae-demo-"))
data = work / "data"
cli("simulate", "--out-dir", data, "--seed", 42)

dets = ["--detections", data / "detections_one_stage.json", "--detections", data / "detections_two_stage.json"]
cli("calibrate", *dets, "--gt", data / "ground_truth.json", "--out", work / "weights.json")
cli("fuse", *dets, "--weights", work / "weights.json", "--out", work / "fused.json")
cli("eval", "--pred", work / "fused.json", "--gt", data / "ground_truth.json",
    "--report", work / "report.json", "--pr-csv", work / "pr_curve.csv")
cli("localize", "--fused", work / "fused.json", "--camera", data / "camera.json",
    "--target-altitude", 120, "--out", work / "localization.json")

# one call does all of it, with per-model and ensemble summary lines
cli("pipeline", *dets, "--gt", data / "ground_truth.json", "--camera", data / "camera.json",
    "--target-altitude", 120, "--workers", 2, "--out-dir", work / "run")
print("artifacts:", sorted(p.name for p in (work / "run").iterdir()))
print("scratch directory:", work)
