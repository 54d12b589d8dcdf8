"""Recompute the dimensionless constants cache shipped with the package.

    python scripts/compute_constants.py [--beta 2 4] [--out PATH]
"""

import argparse
import time
from pathlib import Path

from mobility_ldp.asymptotics import ConstantsCache, _bundled_cache


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--beta", type=float, nargs="+", default=[2.0, 4.0])
    ap.add_argument("--out", type=Path, default=_bundled_cache())
    args = ap.parse_args()
    cache = ConstantsCache(path=args.out.with_suffix(".none"))  # start empty
    for dim in (1, 2):
        jobs = [("power", b) for b in args.beta] + [("max", None)]
        for kind, beta in jobs:
            t = time.time()
            rec = cache.get(kind, beta, dim)
            print(f"{kind:5s} beta={beta} d={dim}: {rec.value:.8f}  L={rec.halfwidth:g} "
                  f"n={rec.n}  ({time.time() - t:.1f}s)")
    cache.save(args.out)
    print("wrote", args.out)


if __name__ == "__main__":
    main()
