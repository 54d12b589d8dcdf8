"""Rate function of the time average ``E_T / T`` by parametric Legendre transform.

For each tilt ``lam`` the ground eigenvalue ``eps0(lam)`` is concave and its
slope ``x(lam) = <phi0|V|phi0>`` is exact, so every solve yields one point of
the rate function directly: ``I(x(lam)) = eps0(lam) - lam * x(lam)``.  Large
positive tilts probe atypically small averages, large negative tilts
atypically large ones.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .eigen import DEFAULT_TOL, EigenResult, min_eig
from .errors import ConfigError, ConvergenceError, RangeError, UsageError
from .grid import GridSpec, assemble
from .potentials import Potential, PotentialStats, cell_stats
from .records import write_csv

CSV_COLUMNS = ("lambda", "eps0", "x", "I")


def default_lambda_grid(lam_min: float = 1e-2, lam_max: float = 1e4, points: int = 81) -> np.ndarray:
    """Zero plus geometric tilts ``+-[lam_min, lam_max]``; ``points`` must be odd."""
    if points < 3 or points % 2 == 0:
        raise ConfigError(f"lambda points must be odd and >= 3, got {points}")
    if not 0 < lam_min < lam_max:
        raise ConfigError("need 0 < lambda_min < lambda_max")
    side = np.geomspace(lam_min, lam_max, (points - 1) // 2)
    return np.concatenate([-side[::-1], [0.0], side])


@dataclass(frozen=True)
class RateCurve:
    """Samples ``(lam, eps0, x, I)`` sorted by increasing tilt.

    ``x`` is nonincreasing along the arrays.  ``stats`` holds the exact cell
    extremes and a fine-quadrature mean; ``grid_mean`` is the grid average of
    ``V`` (the sample at zero tilt).
    """

    lam: np.ndarray
    eps0: np.ndarray
    x: np.ndarray
    I: np.ndarray
    residuals: np.ndarray
    potential: Potential
    grid: GridSpec
    D: float
    stats: PotentialStats
    gaps: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return self.lam.size

    @property
    def grid_mean(self) -> float:
        return float(self.x[np.flatnonzero(self.lam == 0.0)[0]])

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x.min()), float(self.x.max())

    def legendre_residuals(self) -> np.ndarray:
        return self.I + self.lam * self.x - self.eps0

    def by_x(self):
        """``(x, I, lam)`` sorted by increasing ``x``."""
        order = np.argsort(self.x, kind="stable")
        return self.x[order], self.I[order], self.lam[order]

    def rows(self):
        return zip(self.lam.tolist(), self.eps0.tolist(), self.x.tolist(), self.I.tolist())

    def meta(self) -> dict:
        return {
            "dimension": self.grid.dimension,
            "side_length": self.grid.geometry.side_length,
            "grid_n": self.grid.n,
            "boundary": self.grid.boundary.value,
            "D": self.D,
            "potential": self.potential.describe(),
            "v_min": self.stats.v_min,
            "v_max": self.stats.v_max,
            "v_mean": self.stats.v_mean,
        }

    def to_dict(self) -> dict:
        return {
            **self.meta(),
            "grid_mean": self.grid_mean,
            "samples": {
                "lambda": self.lam.tolist(),
                "eps0": self.eps0.tolist(),
                "x": self.x.tolist(),
                "I": self.I.tolist(),
            },
        }

    def to_csv(self, path, meta: dict | None = None):
        return write_csv(path, CSV_COLUMNS, self.rows(), {**self.meta(), **(meta or {})})


def _solve(grid, pot, D, lam, tol, nev):
    return min_eig(assemble(grid, pot, D, lam), tol=tol, nev=nev)


def sweep(grid: GridSpec, pot: Potential, D: float, lams=None, tol: float = DEFAULT_TOL,
          workers: int = 1, with_gap: bool = False, quadrature_resolution: int = 512) -> RateCurve:
    """One ground-state solve per tilt, assembled into a :class:`RateCurve`.

    ``workers > 1`` runs the solves on a thread pool; each solve is
    deterministic, so the curve does not depend on the schedule.
    """
    lams = default_lambda_grid() if lams is None else np.asarray(lams, dtype=float)
    if lams.ndim != 1 or not np.all(np.diff(lams) > 0):
        raise ConfigError("tilt grid must be strictly increasing")
    if not (lams[0] < 0 < lams[-1]) or not np.any(lams == 0.0):
        raise ConfigError("tilt grid must contain 0 and both signs")
    nev = 2 if with_gap else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda l: _solve(grid, pot, D, l, tol, nev), lams))
    else:
        results = [_solve(grid, pot, D, l, tol, nev) for l in lams]
    return curve_from_results(results, grid, pot, D, quadrature_resolution)


def curve_from_results(results: list[EigenResult], grid, pot, D, quadrature_resolution=512) -> RateCurve:
    lam = np.array([r.lam for r in results])
    eps0 = np.array([r.eps0 for r in results])
    x = np.array([r.vexp for r in results])
    rate = eps0 - lam * x
    # zero tilt: eps0 == 0 exactly for a periodic cell, so I == 0
    res = np.array([r.residual_norm for r in results])
    gaps = np.array([r.gap for r in results]) if results[0].gap is not None else None
    stats = cell_stats(pot, grid.geometry, quadrature_resolution)
    return RateCurve(lam, eps0, x, rate, res, pot, grid, float(D), stats, gaps)


def rate_at(curve: RateCurve, x: float) -> float:
    """Piecewise-linear interpolation of ``I`` in ``x``; never extrapolates."""
    xs, rates, _ = curve.by_x()
    lo, hi = float(xs[0]), float(xs[-1])
    if not lo <= x <= hi:
        raise RangeError(
            f"x={x:g} outside the sampled interval [{lo:g}, {hi:g}]; widen the tilt sweep "
            "(x near v_max needs large negative lambda, x near v_min large positive lambda)"
        )
    if hi == lo:
        return float(rates.min())
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return float(np.interp(x, xs[keep], rates[keep]))


def curvature_at_mean(curve: RateCurve) -> float:
    """``I''`` at the grid mean from the tilts adjacent to zero: ``-dlam/dx``."""
    i = int(np.flatnonzero(curve.lam == 0.0)[0])
    return float(-(curve.lam[i + 1] - curve.lam[i - 1]) / (curve.x[i + 1] - curve.x[i - 1]))


def second_differences(curve: RateCurve) -> np.ndarray:
    """Second divided differences of ``I`` in ``x``; nonnegative for a convex curve."""
    xs, rates, _ = curve.by_x()
    keep = np.concatenate([[True], np.diff(xs) > 0])
    xs, rates = xs[keep], rates[keep]
    slope = np.diff(rates) / np.diff(xs)
    return 2.0 * np.diff(slope) / (xs[2:] - xs[:-2])


class Side(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class TailEstimate:
    x: float
    T: float
    exponent: float
    side: Side

    @property
    def probability(self) -> float:
        """Leading-order probability ``exp(exponent)``."""
        return math.exp(self.exponent)


def tail_probability(curve: RateCurve, x: float, T: float, side="upper") -> TailEstimate:
    """Log-probability ``-I(x) T`` of ``E_T/T`` beyond ``x`` on the given side."""
    side = Side(side)
    if not T > 0:
        raise UsageError("horizon T must be positive")
    mean = curve.grid_mean
    slack = 1e-12 * max(abs(mean), 1.0)
    if side is Side.UPPER and x < mean - slack:
        raise UsageError(f"upper tail needs x >= mean {mean:g}, got {x:g}")
    if side is Side.LOWER and x > mean + slack:
        raise UsageError(f"lower tail needs x <= mean {mean:g}, got {x:g}")
    return TailEstimate(float(x), float(T), -rate_at(curve, x) * T, side)


def rate_by_root(grid, pot, D, x, lam_bracket, tol=DEFAULT_TOL) -> tuple[float, float]:
    """``I(x)`` by solving ``x(lam) = x`` for the tilt; returns ``(I, lam)``."""
    def slope_gap(lam):
        return _solve(grid, pot, D, lam, tol, 1).vexp - x

    lam = optimize.brentq(slope_gap, *lam_bracket, xtol=1e-12, rtol=1e-12)
    res = _solve(grid, pot, D, lam, tol, 1)
    return res.eps0 - lam * res.vexp, lam


def rate_by_minimization(grid, pot, D, x, lam_bracket, tol=DEFAULT_TOL) -> tuple[float, float]:
    """``I(x) = -min_lam {lam x - eps0(lam)}`` by bounded scalar minimisation."""
    def objective(lam):
        return lam * x - _solve(grid, pot, D, lam, tol, 1).eps0

    out = optimize.minimize_scalar(objective, bounds=lam_bracket, method="bounded",
                                   options={"xatol": 1e-10 * max(1.0, max(map(abs, lam_bracket)))})
    if not out.success:
        raise ConvergenceError(f"tilt minimisation failed for x={x:g}")
    return -float(out.fun), float(out.x)
