"""Scenario files: sectioned key-value text parsed with :mod:`configparser`.

A scenario bundles geometry, potential, mobility, tilt sweep, Monte Carlo and
validation settings.  Command-line flags override file values through
``overrides`` keys of the form ``"section.key"``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, LDPError
from .grid import GridSpec
from .mobility import SimConfig
from .potentials import CellGeometry, Potential, cell_stats
from .rate import default_lambda_grid
from .records import digest

DEFAULTS = {
    "scenario": {"name": "unnamed"},
    "geometry": {"dimensions": "2", "side_length": "1.0"},
    "potential": {"kind": "energy", "gamma": "1.0", "beta": "4.0", "alpha": "1.0", "p": "0.01",
                  "r0": "0.1", "value": "1.0"},
    "mobility": {"D": "1.0"},
    "sweep": {"grid_n_1d": "1024", "grid_n_2d": "128", "lambda_min": "1e-2", "lambda_max": "1e4",
              "lambda_points": "81", "tol": "1e-10", "workers": "1"},
    "simulation": {"paths": "20000", "horizon": "50", "dt": "0.01", "r0": "uniform", "seed": "1",
                   "block_size": "1024", "workers": "1"},
    "validate": {"fk_lambdas": "0.5, 1, 2", "fk_grid_n_1d": "2048", "fk_grid_n_2d": "128",
                 "fk_max_z": "3", "low_tail_rtol": "0.15", "high_tail_rtol": "0.25",
                 "min_window": "3", "curvature_rtol": "0.05"},
    "asymptotics": {"levy_alpha": ""},
    "output": {"directory": "out"},
}


def shipped_scenarios() -> list[str]:
    folder = resources.files("mobility_ldp").joinpath("data", "scenarios")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".cfg"))


def resolve(name_or_path) -> Path:
    """Path to a scenario file: an existing path, or a shipped scenario name."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name[:-4] if p.name.endswith(".cfg") else p.name
    if stem in shipped_scenarios() and p.parent == Path("."):
        return Path(str(resources.files("mobility_ldp").joinpath("data", "scenarios", stem + ".cfg")))
    raise ConfigError(f"no scenario file {name_or_path!r}; shipped: {', '.join(shipped_scenarios())}")


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


@dataclass(frozen=True)
class Scenario:
    name: str
    dimensions: tuple
    side_length: float
    potential: Potential
    D: float
    grid_n: dict
    lambda_min: float
    lambda_max: float
    lambda_points: int
    tol: float
    workers: int
    sim: dict
    validate: dict
    levy_alpha: float | None
    out_dir: Path
    raw: dict = field(repr=False, compare=False)

    def geometry(self, d) -> CellGeometry:
        return CellGeometry(d, self.side_length)

    def grid(self, d, n=None) -> GridSpec:
        return GridSpec(self.geometry(d), n or self.grid_n[d])

    def lambdas(self):
        return default_lambda_grid(self.lambda_min, self.lambda_max, self.lambda_points)

    def sim_config(self, d) -> SimConfig:
        s = self.sim
        return SimConfig(self.geometry(d), self.potential, self.D, T=s["horizon"], dt=s["dt"],
                         paths=s["paths"], r0=s["r0"], seed=s["seed"], block_size=s["block_size"],
                         workers=s["workers"])

    @property
    def hash(self) -> str:
        """Digest of every setting that affects results (thread counts do not)."""
        keep = {k: {o: x for o, x in v.items() if o != "workers"}
                for k, v in self.raw.items() if k != "output"}
        return digest(keep)

    def header(self, **extra) -> dict:
        return {"scenario": self.name, "scenario_hash": self.hash, **extra}


def load_scenario(name_or_path="energy_1d", overrides: dict | None = None) -> Scenario:
    path = resolve(name_or_path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        sec, _, opt = key.partition(".")
        cp.set(sec, opt, str(val))
    raw = {s: dict(cp[s]) for s in cp.sections()}
    try:
        return _build(cp, raw)
    except LDPError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _build(cp, raw) -> Scenario:
    g, pt, sw, sim, val = cp["geometry"], cp["potential"], cp["sweep"], cp["simulation"], cp["validate"]
    dims = tuple(int(x) for x in _floats(g["dimensions"]))
    if not dims or any(d not in (1, 2) for d in dims):
        raise ConfigError(f"dimensions must be drawn from 1, 2; got {g['dimensions']!r}")
    kind = pt["kind"].strip().lower()
    if kind == "energy":
        pot = Potential.energy(pt.getfloat("gamma"), pt.getfloat("beta"))
    elif kind == "throughput":
        pot = Potential.throughput(pt.getfloat("alpha"), pt.getfloat("p"), pt.getfloat("beta"), pt.getfloat("r0"))
    elif kind == "constant":
        pot = Potential.constant(pt.getfloat("value"))
    else:
        raise ConfigError(f"potential kind must be energy, throughput or constant; got {kind!r}")
    side = g.getfloat("side_length")
    for d in dims:
        cell_stats(pot, CellGeometry(d, side), 16)
    r0 = sim["r0"].strip()
    r0 = "uniform" if r0 == "uniform" else _floats(r0)
    dt = sim["dt"].strip()
    simd = {"paths": sim.getint("paths"), "horizon": sim.getfloat("horizon"),
            "dt": None if dt in ("", "auto") else float(dt), "r0": r0, "seed": sim.getint("seed"),
            "block_size": sim.getint("block_size"), "workers": sim.getint("workers")}
    if simd["paths"] < 1:
        raise ConfigError(f"simulation paths must be >= 1, got {simd['paths']}")
    alpha = cp["asymptotics"]["levy_alpha"].strip()
    out = Path(cp["output"]["directory"]).expanduser()
    sc = Scenario(
        name=cp["scenario"]["name"], dimensions=dims, side_length=side, potential=pot,
        D=cp["mobility"].getfloat("D"),
        grid_n={1: sw.getint("grid_n_1d"), 2: sw.getint("grid_n_2d")},
        lambda_min=sw.getfloat("lambda_min"), lambda_max=sw.getfloat("lambda_max"),
        lambda_points=sw.getint("lambda_points"), tol=sw.getfloat("tol"), workers=sw.getint("workers"),
        sim=simd,
        validate={"fk_lambdas": _floats(val["fk_lambdas"]),
                  "fk_grid_n": {1: val.getint("fk_grid_n_1d"), 2: val.getint("fk_grid_n_2d")},
                  "fk_max_z": val.getfloat("fk_max_z"), "low_tail_rtol": val.getfloat("low_tail_rtol"),
                  "high_tail_rtol": val.getfloat("high_tail_rtol"), "min_window": val.getint("min_window"),
                  "curvature_rtol": val.getfloat("curvature_rtol")},
        levy_alpha=float(alpha) if alpha else None, out_dir=out, raw=raw,
    )
    # validate eagerly so bad files fail at load time
    sc.lambdas()
    if not sc.D > 0:
        raise ConfigError("diffusion constant must be positive")
    for d in dims:
        sc.grid(d)
        sc.sim_config(d)
    return sc


def ensure_writable(directory: Path) -> Path:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {directory}: {exc}") from None
    if not os.access(directory, os.W_OK):
        raise ConfigError(f"output directory {directory} is not writable")
    return directory
