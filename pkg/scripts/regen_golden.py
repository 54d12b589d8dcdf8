"""Regenerate the regression anchors under tests/golden.

* ``<scenario>_rate_curve.csv``: the rate command output for the two figure
  scenarios (energy and throughput, 1D and 2D);
* ``tail_windows.json``: the verified agreement windows of the low and high
  tail asymptotes for beta = 2 and 4 in 2D, with the sweep that produced them.

Only rerun after a deliberate numerical change, and review the diff.
"""

import argparse
import json
import shutil
import tempfile
from pathlib import Path

from mobility_ldp import cli
from mobility_ldp.asymptotics import AsymptoticConstants, tail_windows
from mobility_ldp.grid import GridSpec
from mobility_ldp.potentials import CellGeometry, Potential
from mobility_ldp.rate import default_lambda_grid, sweep

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"
FIGURES = ("energy_1d_2d", "throughput_1d_2d")
WINDOW_SWEEP = {"dimension": 2, "grid_n": 128, "lambda_min": 1e-2, "lambda_max": 1e5,
                "lambda_points": 101, "low_rtol": 0.15, "high_rtol": 0.25}


def window_anchors(settings=WINDOW_SWEEP):
    grid = GridSpec(CellGeometry(settings["dimension"], 1.0), settings["grid_n"])
    lams = default_lambda_grid(settings["lambda_min"], settings["lambda_max"], settings["lambda_points"])
    out = {}
    for beta in (2.0, 4.0):
        curve = sweep(grid, Potential.energy(1.0, beta), 1.0, lams)
        consts = AsymptoticConstants.compute(settings["dimension"], beta)
        wins = tail_windows(curve, consts, settings["low_rtol"], settings["high_rtol"])
        out[f"{beta:g}"] = {side: [list(w) for w in ws] for side, ws in wins.items()}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=GOLDEN)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name in FIGURES:
            code = cli.main(["rate", "--config", name, "--out", f"{tmp}/{name}"])
            if code:
                raise SystemExit(f"rate command failed for {name} with status {code}")
            shutil.copy(f"{tmp}/{name}/rate_curve.csv", args.out / f"{name}_rate_curve.csv")
    doc = {"sweep": WINDOW_SWEEP, "windows": window_anchors()}
    (args.out / "tail_windows.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc["windows"], indent=2))


if __name__ == "__main__":
    main()
