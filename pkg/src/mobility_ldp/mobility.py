"""Monte Carlo oracle: Brownian users on a periodic cell.

Paths advance by exact Gaussian increments ``sqrt(D dt) * xi`` and are
wrapped back into ``(-R/2, R/2]`` on every step.  ``E_T`` is accumulated with
the trapezoidal rule on the wrapped positions.

Random streams: the seed feeds a :class:`numpy.random.SeedSequence` which is
spawned into one child per block of ``block_size`` consecutive paths.  A
block draws its starting points (when uniform) and then its increments in
time order from its own stream, so serial and threaded runs produce the same
samples path by path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .eigen import EigenResult
from .errors import ConfigError, InsufficientDataError
from .potentials import CellGeometry, Potential, cell_stats
from .rate import Side
from .records import write_csv

CHUNK_STEPS = 256
MIN_TAIL_COUNT = 50


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run description.

    ``dt=None`` picks the largest step ``<= R**2 / (2000 D)`` that divides
    ``T``.  A user-given ``dt`` must divide ``T``.  ``r0`` is a point in the
    cell or ``"uniform"``.  Keep ``dt <= h**2 / D`` for the grid spacing
    ``h`` of any operator the run is compared against, so a step does not
    jump over features the grid resolves.
    """

    geometry: CellGeometry
    potential: Potential
    D: float = 1.0
    T: float = 50.0
    dt: Optional[float] = None
    paths: int = 1000
    r0: Union[str, Sequence[float]] = "uniform"
    seed: int = 0
    block_size: int = 1024
    workers: int = 1

    def __post_init__(self):
        if not self.D >= 0:
            raise ConfigError("diffusion constant must be nonnegative")
        if not self.T > 0:
            raise ConfigError("horizon T must be positive")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ConfigError(f"path count must be a positive integer, got {self.paths}")
        if self.block_size < 1 or self.workers < 1:
            raise ConfigError("block_size and workers must be positive")
        if self.dt is None:
            ref = self.geometry.side_length**2 / (2000.0 * self.D) if self.D > 0 else self.T
            steps = max(1, math.ceil(self.T / ref - 1e-9))
            object.__setattr__(self, "dt", self.T / steps)
        elif not self.dt > 0:
            raise ConfigError("time step must be positive")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"T/dt must be an integer, got {ratio:g}")
        if not isinstance(self.r0, str):
            r0 = tuple(float(c) for c in self.r0)
            if len(r0) != self.geometry.dimension or not self.geometry.contains(np.array(r0)):
                raise ConfigError(f"start point {r0} is not inside the cell")
            object.__setattr__(self, "r0", r0)
        elif self.r0 != "uniform":
            raise ConfigError("r0 must be a point or 'uniform'")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def describe(self) -> dict:
        return {"dimension": self.geometry.dimension, "side_length": self.geometry.side_length,
                "potential": self.potential.describe(), "D": self.D, "T": self.T, "dt": self.dt,
                "paths": self.paths, "r0": self.r0, "seed": self.seed, "block_size": self.block_size}


def wrap(x, half):
    """Map coordinates into ``(-half, half]``."""
    return half - np.mod(half - x, 2.0 * half)


def _run_block(cfg: SimConfig, seq: np.random.SeedSequence, count: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seq))
    d, half = cfg.geometry.dimension, cfg.geometry.half
    if cfg.r0 == "uniform":
        pos = wrap(rng.uniform(-half, half, size=(count, d)), half)
    else:
        pos = np.tile(np.asarray(cfg.r0, dtype=float), (count, 1))
    v0 = cfg.potential(pos)
    # accumulate V - V(r0) so frozen or constant paths give exactly V(r0)
    acc = np.zeros(count)
    scale = math.sqrt(cfg.D * cfg.dt)
    remaining = cfg.steps
    last = v0
    while remaining:
        c = min(CHUNK_STEPS, remaining)
        inc = rng.standard_normal((c, count, d))
        inc *= scale
        traj = wrap(pos + np.cumsum(inc, axis=0), half)
        v = cfg.potential(traj)
        v -= v0
        acc += v.sum(axis=0)
        last = v[-1]
        pos = traj[-1]
        remaining -= c
    # trapezoid: the interior points carry weight 1, the final point 1/2
    acc -= 0.5 * last
    return v0 + acc / cfg.steps


@dataclass(frozen=True)
class PathEnsembleStats:
    """Samples of ``E_T / T`` (ordered by path id) and derived summaries."""

    samples: np.ndarray = field(repr=False)
    T: float
    dt: float
    mean: float
    var: float
    hist_counts: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)

    @property
    def paths(self) -> int:
        return self.samples.size

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.paths) if self.paths > 1 else float("nan")

    def exp_moment(self, lam: float) -> float:
        """``log((1/m) sum exp(-lam E_T))``."""
        return float(logsumexp(-lam * self.T * self.samples) - math.log(self.paths))

    def exp_moment_stderr(self, lam: float) -> float:
        """Delta-method standard error of :meth:`exp_moment`."""
        w = np.exp(-lam * self.T * self.samples - self.exp_moment(lam))
        return float(np.std(w, ddof=1) / math.sqrt(self.paths)) if self.paths > 1 else float("nan")

    def effective_sample_size(self, lam: float) -> float:
        a = -lam * self.T * self.samples
        w = np.exp(a - a.max())
        return float(w.sum() ** 2 / np.dot(w, w))

    def summary(self, lams=()) -> dict:
        return {
            "T": self.T, "dt": self.dt, "paths": self.paths, "mean": self.mean, "var": self.var,
            "stderr": self.stderr,
            "histogram": {"counts": self.hist_counts.tolist(), "edges": self.hist_edges.tolist()},
            "exp_moments": [
                {"lambda": float(l), "log_mean": self.exp_moment(l), "stderr": self.exp_moment_stderr(l)}
                for l in lams
            ],
        }

    def write_samples(self, path, meta: dict | None = None):
        rows = ((i, s) for i, s in enumerate(self.samples.tolist()))
        return write_csv(path, ("path_id", "E_T_over_T"), rows, meta)


def simulate(cfg: SimConfig, bins: int = 50) -> PathEnsembleStats:
    nblocks = -(-cfg.paths // cfg.block_size)
    children = np.random.SeedSequence(cfg.seed).spawn(nblocks)
    sizes = [min(cfg.block_size, cfg.paths - b * cfg.block_size) for b in range(nblocks)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda a: _run_block(cfg, *a), zip(children, sizes)))
    else:
        parts = [_run_block(cfg, s, c) for s, c in zip(children, sizes)]
    samples = np.concatenate(parts)
    samples.setflags(write=False)
    m = samples.size
    mean = math.fsum(samples) / m
    var = math.fsum((samples - mean) ** 2) / (m - 1) if m > 1 else 0.0
    st = cell_stats(cfg.potential, cfg.geometry, 64)
    lo, hi = min(st.v_min, samples.min()), max(st.v_max, samples.max())
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi) if hi > lo else (lo - 0.5, lo + 0.5))
    return PathEnsembleStats(samples, cfg.T, cfg.dt, mean, var, counts, edges)


def periodic_interp(values: np.ndarray, geom: CellGeometry, point) -> float:
    """Multilinear interpolation of cell-centred grid values on the periodic cell."""
    d = geom.dimension
    n = int(round(values.size ** (1.0 / d)))
    grid = values.reshape((n,) * d)
    h = geom.side_length / n
    # index coordinate of the point; grid point i sits at -R/2 + (i + 1/2) h
    u = (np.asarray(point, dtype=float) + geom.half) / h - 0.5
    base = np.floor(u).astype(int)
    frac = u - base
    total = 0.0
    for corner in np.ndindex(*(2,) * d):
        c = np.asarray(corner)
        w = float(np.prod(np.where(c == 1, frac, 1.0 - frac)))
        total += w * grid[tuple((base + c) % n)]
    return total


@dataclass(frozen=True)
class FKReport:
    """Empirical versus spectral ``-(1/T) log E[exp(-lam E_T)]``."""

    lam: float
    T: float
    empirical: float
    predicted: float
    eps0: float
    prefactor: float
    stderr: float
    z: float
    ess: float
    reliable: bool
    start: str
    gap_T: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def fk_check(cfg: SimConfig, lam: float, eigen: EigenResult, stats: PathEnsembleStats | None = None,
             n_boot: int = 400, boot_seed: int = 0) -> FKReport:
    """Compare the path average with ``eps0 - (1/T) log(prefactor)``.

    The prefactor is ``theta0 * phi0(r0)`` for a fixed start and
    ``theta0**2 / R**d`` for a uniform start.  The standard error comes from
    a bootstrap over paths.  ``reliable`` is false when the exponential
    weights are carried by too few paths (effective sample size below 1% of
    the paths or below 100).
    """
    if stats is None:
        stats = simulate(cfg)
    T = stats.T
    if cfg.r0 == "uniform":
        pref = eigen.theta0**2 / cfg.geometry.volume
        start = "uniform"
    else:
        pref = eigen.theta0 * periodic_interp(np.asarray(eigen.phi0), cfg.geometry, cfg.r0)
        start = "fixed"
    if lam == 0:
        # the moment is identically one
        pref = 1.0
    empirical = -stats.exp_moment(lam) / T
    predicted = eigen.eps0 - math.log(pref) / T
    rng = np.random.default_rng(boot_seed)
    a = -lam * T * stats.samples
    m = a.size
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, m, m)
        boots[b] = -(logsumexp(a[idx]) - math.log(m)) / T
    se = float(np.std(boots, ddof=1)) if n_boot > 1 else float("nan")
    diff = empirical - predicted
    z = 0.0 if diff == 0 else diff / se if se > 0 else math.copysign(math.inf, diff)
    ess = stats.effective_sample_size(lam)
    reliable = ess >= max(100.0, 0.01 * m)
    gap_T = eigen.gap * T if eigen.gap is not None else None
    return FKReport(float(lam), T, empirical, predicted, eigen.eps0, float(pref), se, float(z), ess,
                    reliable, start, gap_T)


def empirical_rate(stats: PathEnsembleStats, x: float, side="upper") -> tuple[float, float]:
    """``-(1/T) log P(E_T/T beyond x)`` by counting, with a binomial error bar."""
    side = Side(side)
    s = stats.samples
    count = int(np.count_nonzero(s > x if side is Side.UPPER else s < x))
    if count < MIN_TAIL_COUNT:
        raise InsufficientDataError(
            f"only {count} of {s.size} samples beyond x={x:g}; use more paths or a threshold closer to the mean"
        )
    p = count / s.size
    rate = -math.log(p) / stats.T
    err = math.sqrt((1.0 - p) / (s.size * p)) / stats.T
    return rate, err
