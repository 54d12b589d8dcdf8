"""Closed-form limits of the energy rate function and their constants.

Three regimes of the tilt are covered:

* large positive tilt (atypically low energy): the ground state shrinks
  around the cell centre, the cell looks like the whole plane, and scaling
  gives ``I(x) ~ x**(-2/beta)`` with a constant fixed by the ground energy
  of ``-(1/2) lap + |r|**beta``;
* large negative tilt (atypically high energy): the ground state sits on the
  corner where ``r = r_max``; linearising ``r**beta`` there gives the
  operator ``-(1/2) lap + max(|x|, |y|)`` and ``I(x) ~ (1 - x/P_max)**-2``;
* small tilt: second-order perturbation in the plane-wave basis of the
  periodic Laplacian gives a parabola around the cell mean.

The 1D versions follow from the same scaling with the free-line constants
(``-(1/2) d2 + |x|**beta`` and ``-(1/2) d2 + |x|``); they are an extension,
not separately derived closed forms.

Dimensionless constants are computed once on truncated boxes with zero
Dirichlet data and cached in a JSON file.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .eigen import min_eig
from .errors import DomainError
from .grid import assemble_free_plane
from .potentials import CellGeometry, Potential, PotentialKind, cell_stats, midpoints

LENGTH_TOL = 1e-6
COARSE_H = 1.0 / 8.0


@dataclass(frozen=True)
class ConstantRecord:
    """Provenance of one dimensionless ground energy.

    ``value`` is the Richardson extrapolation of the solves at spacing ``h``
    and ``h/2`` on the box ``(-halfwidth, halfwidth)^d``; ``n`` is the finer
    grid size and ``residual`` its eigen-residual.
    """

    kind: str
    beta: float | None
    dimension: int
    value: float
    halfwidth: float
    n: int
    residual: float
    coarse: float
    fine: float


def _solve_box(kind, beta, dimension, halfwidth, h):
    n = int(round(2 * halfwidth / h))
    res = min_eig(assemble_free_plane(halfwidth, n, kind, beta, dimension))
    return res.eps0, res.residual_norm, n


def free_plane_constant(kind: str, beta: float | None = None, dimension: int = 2,
                        h: float = COARSE_H, halfwidth: float = 4.0) -> ConstantRecord:
    """Ground energy of ``-(1/2) lap + V`` on the whole line or plane.

    ``kind="power"`` uses ``V = |r|**beta``; ``kind="max"`` uses
    ``V = max(|x|, |y|)`` (``|x|`` in 1D).  The box is doubled until the
    energy moves by less than ``1e-6``; the spacing is then halved once and
    the two results extrapolated.
    """
    L = halfwidth
    prev, _, _ = _solve_box(kind, beta, dimension, L, h)
    while True:
        cur, _, _ = _solve_box(kind, beta, dimension, 2 * L, h)
        L *= 2
        if abs(cur - prev) < LENGTH_TOL:
            break
        prev = cur
    coarse = cur
    fine, residual, n = _solve_box(kind, beta, dimension, L, h / 2)
    value = (4.0 * fine - coarse) / 3.0
    return ConstantRecord(kind, None if beta is None else float(beta), dimension, value, L, n,
                          residual, coarse, fine)


def _bundled_cache() -> Path:
    return Path(str(resources.files("mobility_ldp").joinpath("data", "constants_cache.json")))


class ConstantsCache:
    """Write-once store of :class:`ConstantRecord` keyed by (kind, beta, dimension)."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else _bundled_cache()
        self._records: dict[tuple, ConstantRecord] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for rec in json.loads(self.path.read_text())["records"]:
                r = ConstantRecord(**rec)
                self._records[self._key(r.kind, r.beta, r.dimension)] = r

    @staticmethod
    def _key(kind, beta, dimension):
        return (kind, None if beta is None or kind == "max" else round(float(beta), 12), int(dimension))

    def get(self, kind, beta, dimension, persist=False) -> ConstantRecord:
        key = self._key(kind, beta, dimension)
        with self._lock:
            rec = self._records.get(key)
            if rec is None:
                rec = free_plane_constant(kind, key[1], dimension)
                self._records[key] = rec
                if persist:
                    self.save()
        return rec

    def records(self):
        return sorted(self._records.values(), key=lambda r: (r.kind, r.dimension, r.beta or 0.0))

    def save(self, path=None):
        path = Path(path) if path is not None else self.path
        payload = {"records": [asdict(r) for r in self.records()]}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


_default_cache = None


def default_cache() -> ConstantsCache:
    global _default_cache
    if _default_cache is None:
        _default_cache = ConstantsCache()
    return _default_cache


@dataclass(frozen=True)
class AsymptoticConstants:
    dimension: int
    beta: float
    eps0_dimless: float
    eps_m: float
    provenance: dict

    @classmethod
    def compute(cls, dimension: int, beta: float, cache: ConstantsCache | None = None):
        cache = cache or default_cache()
        low = cache.get("power", beta, dimension)
        high = cache.get("max", None, dimension)
        return cls(dimension, float(beta), low.value, high.value,
                   {"power": asdict(low), "max": asdict(high)})


def low_tail(x, beta, gamma, R, D, consts: AsymptoticConstants):
    """Leading behaviour of ``I`` for averages far below the cell mean."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("low-energy asymptote needs x > 0")
    e0 = consts.eps0_dimless
    pref = 0.5 * beta * (2.0 * e0 / (beta + 2.0)) ** (1.0 + 2.0 / beta)
    out = D / R**2 * pref * (x / (gamma * R**beta)) ** (-2.0 / beta)
    return float(out) if out.ndim == 0 else out


def high_tail(x, beta, gamma, R, D, consts: AsymptoticConstants):
    """Leading behaviour of ``I`` as the average approaches ``P_max``.

    With ``P_max = gamma r_max**beta`` and corner slope
    ``k = |lam| gamma beta r_max**(beta-1)``, the corner problem gives
    ``eps0 = lam P_max + D**(1/3) k**(2/3) eps_m``; its Legendre transform is
    ``I = (4 eps_m**3 / 27) (D beta**2 / r_max**2) (1 - x/P_max)**-2``.
    """
    x = np.asarray(x, dtype=float)
    r_max = 0.5 * R * math.sqrt(consts.dimension)
    p_max = gamma * r_max**beta
    if np.any(x >= p_max):
        raise DomainError(f"x must stay below the deterministic ceiling P_max={p_max:g}")
    pref = 4.0 * consts.eps_m**3 / 27.0 * D * beta**2 / r_max**2
    out = pref * (1.0 - x / p_max) ** -2.0
    return float(out) if out.ndim == 0 else out


MODE_TOL = 1e-10


def gaussian_center(pot: Potential, geom: CellGeometry, D: float, n_modes: int = 128,
                    quadrature_resolution: int | None = None) -> tuple[float, float]:
    """Cell mean and asymptotic variance ``sigma2`` of the time average.

    ``sigma2 = 2 sum_{k != 0} |V_k|**2 / eps_k`` over plane waves
    ``exp(i k.r)``, ``k = 2 pi m / R``, ``eps_k = (D/2)|k|**2``, with ``V_k``
    the midpoint-rule Fourier coefficient of ``V``.  Shells ``max|m_i| = s``
    are added until one contributes less than ``1e-10`` of the running sum or
    ``s = n_modes``.
    """
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    d = geom.dimension
    M = quadrature_resolution or (2048 if d == 1 else 1024)
    if M < 2 * n_modes + 1:
        raise DomainError("quadrature_resolution must exceed 2 * n_modes")
    vals = pot(midpoints(geom, M)).reshape((M,) * d)
    coef = np.fft.fftn(vals) / vals.size
    power = np.abs(coef) ** 2
    m = np.fft.fftfreq(M, 1.0 / M).astype(int)
    grids = np.meshgrid(*([m] * d), indexing="ij")
    shell = np.max(np.abs(np.stack(grids)), axis=0)
    k2 = sum(g.astype(float) ** 2 for g in grids) * (2 * math.pi / geom.side_length) ** 2
    v_mean = cell_stats(pot, geom, M).v_mean if pot.kind is not PotentialKind.CONSTANT else pot.value
    total = 0.0
    for s in range(1, n_modes + 1):
        sel = shell == s
        part = float(np.sum(power[sel] / (0.5 * D * k2[sel])))
        total += part
        if part < MODE_TOL * total:
            break
    return v_mean, 2.0 * total


def levy_exponents(alpha: float, beta: float) -> tuple[float, float]:
    """Power-law exponents of the low and high energy tails for a stable-law walk of index ``alpha``.

    ``I_low ~ x**(-alpha/beta)`` and ``I_high ~ (1 - x/P_max)**(-alpha)``;
    ``alpha = 2`` is the Brownian case.
    """
    if not 0 < alpha <= 2:
        raise DomainError(f"stable index alpha must lie in (0, 2], got {alpha}")
    if not beta > 0:
        raise DomainError("beta must be positive")
    return -alpha / beta, -float(alpha)


def agreement_windows(xs, numeric, approx, rtol):
    """Maximal runs of consecutive samples where ``|approx/numeric - 1| < rtol``.

    Returns ``[(x_lo, x_hi, count), ...]`` with ``xs`` taken as sorted.
    """
    xs = np.asarray(xs)
    numeric = np.asarray(numeric, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (numeric > 0) & (np.abs(np.asarray(approx) / numeric - 1.0) < rtol)
    out, start = [], None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        if (not flag or i == len(ok) - 1) and start is not None:
            stop = i if flag else i - 1
            out.append((float(xs[start]), float(xs[stop]), stop - start + 1))
            start = None
    return out


def tail_overlays(curve, consts: AsymptoticConstants):
    """Low and high tail asymptotes at the samples of an energy rate curve.

    Returns two arrays aligned with ``curve.x``, ``nan`` where a formula is
    undefined (``x <= 0`` or ``x >= P_max``).
    """
    pot = curve.potential
    if pot.kind is not PotentialKind.ENERGY:
        raise DomainError("tail asymptotes apply to the energy potential only")
    geom = curve.grid.geometry
    args = (pot.beta, pot.gamma, geom.side_length, curve.D, consts)
    p_max = pot.gamma * geom.r_max**pot.beta
    x = curve.x
    low = np.full(x.shape, math.nan)
    high = np.full(x.shape, math.nan)
    lm, hm = x > 0, x < p_max
    low[lm] = low_tail(x[lm], *args)
    high[hm] = high_tail(x[hm], *args)
    return low, high


def tail_windows(curve, consts: AsymptoticConstants, low_rtol: float = 0.15,
                 high_rtol: float = 0.25) -> dict:
    """Agreement windows of each tail formula on its own side of the cell mean.

    Returns ``{"low": [...], "high": [...]}`` with windows as produced by
    :func:`agreement_windows`, abscissae increasing.
    """
    low, high = tail_overlays(curve, consts)
    # x decreases along the tilt axis
    x, rate = curve.x[::-1], curve.I[::-1]
    low, high = low[::-1], high[::-1]
    below = x < curve.stats.v_mean
    return {
        "low": agreement_windows(x[below], rate[below], low[below], low_rtol),
        "high": agreement_windows(x[~below], rate[~below], high[~below], high_rtol),
    }
