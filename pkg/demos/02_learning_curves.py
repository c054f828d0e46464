"""
Online learning on a random CMDP
================================

Run UOpt-RPGPD and two ablations for a few thousand episodes through the
experiment harness, then chart the gaps.
"""
import json
import tempfile
from pathlib import Path

import numpy as np

from cmdp_lab.harness import ExperimentConfig, emit_chart, read_run_csv, run_experiment

workdir = Path(tempfile.mkdtemp())
config = ExperimentConfig.from_dict({
    "env": {"seed": 0, "states": 30, "actions": 3, "horizon": 10},
    "variants": ["UOptRPGPD", "NoAdjustment", "NoRegularization"],
    "episodes": 2000,
    "seeds": [0],
    "output_dir": "runs",
}, base_dir=workdir)

manifest_path = run_experiment(config)
manifest = json.loads(manifest_path.read_text())
print("v* =", manifest["v_star"])

for run in manifest["runs"]:
    cols = read_run_csv(manifest_path.parent / run["csv"])
    tail = slice(-100, None)
    print(f"{run['algo']:18s} final gap {np.mean(cols['opt_gap'][tail]):.3f}"
          f"  violation {np.mean(cols['violation'][tail]):.3f}"
          f"  regret {run['regret_opt']:.1f} / {run['regret_vio']:.1f}")

svg = emit_chart([manifest_path.parent / r["csv"] for r in manifest["runs"]], workdir / "curves.svg")
print("chart written to", svg)
