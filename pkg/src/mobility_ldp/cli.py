"""Command-line entry point: ``mobility-ldp {rate,simulate,validate,asymptotics}``.

Every subcommand reads a scenario (a shipped name or a path), applies flag
overrides and writes its outputs into the scenario's output directory.

Exit status: 0 success, 2 configuration or domain error, 3 eigensolver
failure, 4 failed validation row.

Output files
------------
``rate_curve.csv``
    columns ``dim, lambda, eps0, x, I, x_over_vmax``; one block per dimension.
``rate_curve.json``
    the same curves with cell statistics; schema ``rate_curve.schema.json``.
``rate_curve.gp``
    gnuplot script plotting ``I`` against ``x / v_max`` for every dimension.
``samples_{d}d.csv``
    columns ``path_id, E_T_over_T``.
``summary.json``
    path ensemble summaries; schema ``simulate.schema.json``.
``validate.json``
    pass/fail rows; schema ``validate.schema.json``.
``asymptotics.csv``
    columns ``dim, lambda, x, x_over_vmax, I, I_low, I_high, I_gauss``
    (``nan`` where an approximation does not apply).
``asymptotics.json``
    constants, windows and curvature check; schema ``asymptotics.schema.json``.

CSV files start with ``# key: value`` lines carrying the scenario hash, grid
parameters and code version.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (AsymptoticConstants, gaussian_center, levy_exponents, tail_overlays,
                          tail_windows)
from .eigen import min_eig
from .errors import ConfigError, ConvergenceError, DomainError, LDPError
from .grid import assemble
from .mobility import fk_check, simulate
from .potentials import PotentialKind
from .rate import RateCurve, curvature_at_mean, rate_at, second_differences, sweep
from .records import header_lines, validate_json, write_csv, write_json
from .scenario import Scenario, ensure_writable, load_scenario

log = logging.getLogger("mobility_ldp")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4

RATE_COLUMNS = ("dim", "lambda", "eps0", "x", "I", "x_over_vmax")
ASYMPTOTICS_COLUMNS = ("dim", "lambda", "x", "x_over_vmax", "I", "I_low", "I_high", "I_gauss")

LEGENDRE_TOL = 1e-10
CONVEXITY_TOL = 1e-8
MEAN_RATE_TOL = 1e-6


def _json_safe(values):
    return [None if not math.isfinite(v) else v for v in values]


def _normalise(x, v_max):
    return np.asarray(x) / v_max if v_max > 0 else np.full(np.shape(x), math.nan)


def _grid_meta(sc: Scenario) -> dict:
    return {"grid_n": {str(d): sc.grid_n[d] for d in sc.dimensions}, "dimensions": list(sc.dimensions),
            "side_length": sc.side_length, "D": sc.D, "potential": sc.potential.describe()}


def compute_curves(sc: Scenario) -> dict[int, RateCurve]:
    curves = {}
    for d in sc.dimensions:
        log.info("sweeping %dD on %d points, %d tilts", d, sc.grid_n[d], sc.lambda_points)
        curves[d] = sweep(sc.grid(d), sc.potential, sc.D, sc.lambdas(), tol=sc.tol, workers=sc.workers)
    return curves


# -- rate ---------------------------------------------------------------------

def _gnuplot(sc: Scenario, csv_name: str, skip: int) -> str:
    label = "energy" if sc.potential.kind is PotentialKind.ENERGY else "metric"
    lines = [
        f"# scenario: {sc.name}  hash: {sc.hash}  code_version: {__version__}",
        "set datafile separator ','",
        f"set xlabel '{label} / v_max'",
        "set ylabel 'I'",
        "set yrange [0:*]",
        "set key top center",
    ]
    plots = [f"'{csv_name}' skip {skip} using ($1=={d} ? $6 : 1/0):5 with lines title '{d}D'"
             for d in sc.dimensions]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_rate(sc: Scenario, out: Path) -> int:
    if sc.potential.kind is PotentialKind.CONSTANT:
        log.warning("constant potential: the rate curve collapses to a single point at x = %g",
                    sc.potential.value)
    curves = compute_curves(sc)
    rows, payload = [], []
    for d, c in curves.items():
        xn = _normalise(c.x, c.stats.v_max)
        rows.extend(zip([d] * len(c), c.lam.tolist(), c.eps0.tolist(), c.x.tolist(), c.I.tolist(),
                        xn.tolist()))
        entry = c.to_dict()
        entry["samples"]["x_over_vmax"] = _json_safe(xn.tolist())
        payload.append(entry)
    meta = {**sc.header(), **_grid_meta(sc)}
    write_csv(out / "rate_curve.csv", RATE_COLUMNS, rows, meta)
    skip = len(header_lines(meta)) + 1
    doc = {**meta, "code_version": __version__, "curves": payload}
    validate_json(doc, "rate_curve.schema.json")
    write_json(out / "rate_curve.json", doc)
    (out / "rate_curve.gp").write_text(_gnuplot(sc, "rate_curve.csv", skip))
    print(f"wrote {out / 'rate_curve.csv'}, rate_curve.json, rate_curve.gp")
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def cmd_simulate(sc: Scenario, out: Path) -> int:
    summaries = []
    for d in sc.dimensions:
        cfg = sc.sim_config(d)
        log.info("simulating %dD: %d paths, T=%g, dt=%g", d, cfg.paths, cfg.T, cfg.dt)
        stats = simulate(cfg)
        meta = {**sc.header(), **cfg.describe()}
        stats.write_samples(out / f"samples_{d}d.csv", meta)
        summaries.append({"dimension": d, **stats.summary(sc.validate["fk_lambdas"])})
        print(f"{d}D: mean E_T/T = {stats.mean:.6g} +- {stats.stderr:.2g} over {stats.paths} paths")
    doc = {**sc.header(), "code_version": __version__, "seed": sc.sim["seed"], "ensembles": summaries}
    validate_json(doc, "simulate.schema.json")
    write_json(out / "summary.json", doc)
    return EXIT_OK


# -- validate -----------------------------------------------------------------

def _row(name, dim, value, threshold, passed, note=""):
    return {"check": name, "dimension": dim, "value": value, "threshold": threshold,
            "passed": bool(passed), "note": note}


def validate_rows(sc: Scenario, curves: dict[int, RateCurve] | None = None) -> list[dict]:
    curves = curves or compute_curves(sc)
    v = sc.validate
    rows = []
    scale = sc.D / sc.side_length**2
    for d, c in curves.items():
        leg = float(np.max(np.abs(c.legendre_residuals())))
        rows.append(_row("legendre_identity", d, leg, LEGENDRE_TOL, leg < LEGENDRE_TOL))
        sd = second_differences(c)
        worst = float(sd.min()) if sd.size else 0.0
        rows.append(_row("convexity", d, worst, -CONVEXITY_TOL, worst >= -CONVEXITY_TOL))
        i_mean = rate_at(c, c.stats.v_mean)
        rows.append(_row("rate_at_mean", d, i_mean, MEAN_RATE_TOL * scale, i_mean < MEAN_RATE_TOL * scale))

        # Feynman-Kac cross-check against the path simulator
        cfg = sc.sim_config(d)
        stats = simulate(cfg)
        grid = sc.grid(d, v["fk_grid_n"][d])
        for lam in v["fk_lambdas"]:
            eig = min_eig(assemble(grid, sc.potential, sc.D, lam), tol=sc.tol)
            rep = fk_check(cfg, lam, eig, stats)
            ok = abs(rep.z) <= v["fk_max_z"] and rep.reliable
            rows.append(_row(f"feynman_kac[lambda={lam:g}]", d, rep.z, v["fk_max_z"], ok,
                             f"empirical={rep.empirical:.10g} predicted={rep.predicted:.10g} "
                             f"ess={rep.ess:.0f}"))

        sigma_rows, tail_rows = _asymptotic_checks(sc, d, c)
        rows.extend(sigma_rows + tail_rows)
    return rows


def _asymptotic_checks(sc: Scenario, d: int, c: RateCurve):
    v = sc.validate
    geom = sc.geometry(d)
    _, sigma2 = gaussian_center(sc.potential, geom, sc.D)
    curv = curvature_at_mean(c)
    rel = abs(curv * sigma2 - 1.0)
    sigma_rows = [_row("gaussian_curvature", d, rel, v["curvature_rtol"], rel < v["curvature_rtol"],
                       f"numeric={curv:.8g} perturbative={1.0 / sigma2:.8g}")]
    tail_rows = []
    if sc.potential.kind is PotentialKind.ENERGY:
        consts = AsymptoticConstants.compute(d, sc.potential.beta)
        wins = tail_windows(c, consts, v["low_tail_rtol"], v["high_tail_rtol"])
        for side in ("low", "high"):
            best = max(wins[side], key=lambda w: w[2]) if wins[side] else None
            count = best[2] if best else 0
            note = f"x in [{best[0]:.6g}, {best[1]:.6g}]" if best else "no window"
            tail_rows.append(_row(f"{side}_tail_window", d, count, v["min_window"],
                                  count >= v["min_window"], note))
    return sigma_rows, tail_rows


def cmd_validate(sc: Scenario, out: Path) -> int:
    rows = validate_rows(sc)
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {r['dimension']}D  {r['check']:<{width}}  value={r['value']:.6g}  "
              f"threshold={r['threshold']:.6g}  {r['note']}")
    ok = all(r["passed"] for r in rows)
    doc = {**sc.header(), "code_version": __version__, "passed": ok, "rows": rows}
    validate_json(doc, "validate.schema.json")
    write_json(out / "validate.json", doc)
    return EXIT_OK if ok else EXIT_VALIDATION


# -- asymptotics --------------------------------------------------------------

def cmd_asymptotics(sc: Scenario, out: Path) -> int:
    pot = sc.potential
    if sc.levy_alpha is not None:
        if pot.beta is None:
            raise ConfigError("stable-walk exponents need a potential with a pathloss exponent")
        lo_exp, hi_exp = levy_exponents(sc.levy_alpha, pot.beta)
        print(f"stable index alpha={sc.levy_alpha:g}: I_low ~ x^({lo_exp:g}), "
              f"I_high ~ (1 - x/P_max)^({hi_exp:g})")
    curves = compute_curves(sc)
    rows, entries = [], []
    for d, c in curves.items():
        geom = sc.geometry(d)
        mean, sigma2 = gaussian_center(pot, geom, sc.D)
        gauss = (c.x - mean) ** 2 / (2.0 * sigma2)
        entry = {"dimension": d, "v_mean": mean, "sigma2": sigma2,
                 "curvature_numeric": curvature_at_mean(c), "curvature_perturbative": 1.0 / sigma2}
        if pot.kind is PotentialKind.ENERGY:
            consts = AsymptoticConstants.compute(d, pot.beta)
            low, high = tail_overlays(c, consts)
            wins = tail_windows(c, consts, sc.validate["low_tail_rtol"], sc.validate["high_tail_rtol"])
            entry.update({
                "P_max": pot.gamma * geom.r_max**pot.beta, "eps0_dimless": consts.eps0_dimless,
                "eps_m": consts.eps_m,
                "low_windows": [list(w) for w in wins["low"]],
                "high_windows": [list(w) for w in wins["high"]],
            })
        else:
            low = high = np.full(c.x.shape, math.nan)
        xn = _normalise(c.x, c.stats.v_max)
        rows.extend(zip([d] * len(c), c.lam.tolist(), c.x.tolist(), xn.tolist(), c.I.tolist(),
                        low.tolist(), high.tolist(), gauss.tolist()))
        entries.append(entry)
        print(f"{d}D: curvature at mean {entry['curvature_numeric']:.6g}, "
              f"perturbative {entry['curvature_perturbative']:.6g}")
    meta = {**sc.header(), **_grid_meta(sc)}
    write_csv(out / "asymptotics.csv", ASYMPTOTICS_COLUMNS, rows, meta)
    doc = {**meta, "code_version": __version__, "dimensions_detail": entries}
    if sc.levy_alpha is not None:
        doc["levy"] = {"alpha": sc.levy_alpha, "low_exponent": lo_exp, "high_exponent": hi_exp}
    validate_json(doc, "asymptotics.schema.json")
    write_json(out / "asymptotics.json", doc)
    return EXIT_OK


COMMANDS = {"rate": cmd_rate, "simulate": cmd_simulate, "validate": cmd_validate,
            "asymptotics": cmd_asymptotics}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mobility-ldp", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="energy_1d", help="scenario file or shipped name")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-n", type=int, help="grid points per axis (all dimensions)")
    common.add_argument("--lambda-min", type=float)
    common.add_argument("--lambda-max", type=float)
    common.add_argument("--lambda-points", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--dims", help="comma-separated dimensions, e.g. '1,2'")
    common.add_argument("--workers", type=int, help="threads for tilt solves and path blocks")
    common.add_argument("--alpha", type=float, help="stable index for the tail exponents")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def overrides_from(args) -> dict:
    return {
        "output.directory": args.out, "simulation.seed": args.seed,
        "sweep.grid_n_1d": args.grid_n, "sweep.grid_n_2d": args.grid_n,
        "sweep.lambda_min": args.lambda_min, "sweep.lambda_max": args.lambda_max,
        "sweep.lambda_points": args.lambda_points, "simulation.paths": args.paths,
        "simulation.horizon": args.horizon, "simulation.dt": args.dt, "geometry.dimensions": args.dims,
        "sweep.workers": args.workers, "simulation.workers": args.workers,
        "asymptotics.levy_alpha": args.alpha,
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        sc = load_scenario(args.config, overrides_from(args))
        out = ensure_writable(sc.out_dir)
        return COMMANDS[args.command](sc, out)
    except ConvergenceError as exc:
        where = f" at lambda={exc.lam:g}" if exc.lam is not None else ""
        print(f"error: eigensolver failed{where}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LDPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
