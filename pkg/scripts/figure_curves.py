"""Rate functions of energy and throughput in 1D and 2D, plus the tail overlays.

Runs the ``rate`` command on the two figure scenarios and the ``asymptotics``
command on the energy one, then prints where each curve vanishes and how
steep it is at the ends of the sampled range.  Render with
``gnuplot -p out/energy_1d_2d/rate_curve.gp`` (and likewise for throughput_1d_2d).
"""

import argparse
from pathlib import Path

import numpy as np

from mobility_ldp import cli
from mobility_ldp.records import read_csv


def describe(csv_path):
    _, cols, rows = read_csv(csv_path)
    arr = np.array(rows)
    c = {k: arr[:, i] for i, k in enumerate(cols)}
    for d in sorted(set(c["dim"].astype(int))):
        sel = c["dim"] == d
        xs, rates = c["x_over_vmax"][sel], c["I"][sel]
        order = np.argsort(xs)
        xs, rates = xs[order], rates[order]
        zero = xs[np.argmin(rates)]
        print(f"  {d}D: x/v_max in [{xs[0]:.4f}, {xs[-1]:.4f}], zero at {zero:.4f}, "
              f"I at ends {rates[0]:.3g} / {rates[-1]:.3g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    for name in ("energy_1d_2d", "throughput_1d_2d"):
        target = args.out / name
        code = cli.main(["rate", "--config", name, "--out", str(target), "--workers", str(args.workers)])
        if code:
            raise SystemExit(code)
        print(name)
        describe(target / "rate_curve.csv")
    code = cli.main(["asymptotics", "--config", "energy_1d_2d", "--out", str(args.out / "energy_1d_2d"),
                     "--workers", str(args.workers)])
    raise SystemExit(code)


if __name__ == "__main__":
    main()
