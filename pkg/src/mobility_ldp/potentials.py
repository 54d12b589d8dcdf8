"""Metric potentials V(r) on a square cell centred on the base station.

A potential maps user position to an instantaneous cost or reward: uplink
power under channel inversion (``energy``), capped Shannon rate
(``throughput``), a constant, or an arbitrary user function.  Positions are
arrays whose last axis has length ``dimension``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError

# slack for points sitting on the closed cell boundary after float arithmetic
_BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True)
class CellGeometry:
    """Square (2D) or segment (1D) cell ``(-R/2, R/2)^d``."""

    dimension: int = 2
    side_length: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.side_length > 0:
            raise ConfigError(f"side_length must be positive, got {self.side_length}")

    @property
    def half(self) -> float:
        return 0.5 * self.side_length

    @property
    def volume(self) -> float:
        return self.side_length**self.dimension

    @property
    def r_max(self) -> float:
        """Largest distance from the centre: the corner in 2D, the edge in 1D."""
        return self.half * math.sqrt(self.dimension)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        lim = self.half * (1.0 + _BOUNDARY_SLACK)
        return np.all(np.abs(pts) <= lim, axis=-1)


def midpoints(geom: CellGeometry, n: int) -> np.ndarray:
    """Cell-centred sample points, shape ``(n**d, d)``, first axis slowest."""
    h = geom.side_length / n
    axis = -geom.half + (np.arange(n) + 0.5) * h
    mesh = np.meshgrid(*([axis] * geom.dimension), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


class PotentialKind(str, enum.Enum):
    ENERGY = "energy"
    THROUGHPUT = "throughput"
    CONSTANT = "constant"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Potential:
    """A nonnegative, bounded function of position.

    Use the classmethod constructors rather than filling fields by hand.
    ``value`` is the level of a constant potential; ``func`` and
    ``declared_max`` describe a custom one.
    """

    kind: PotentialKind
    gamma: float = 1.0
    beta: float = 4.0
    alpha: float = 1.0
    p: float = 0.01
    r0: float = 0.1
    value: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    declared_max: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        kind = PotentialKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (PotentialKind.ENERGY, PotentialKind.THROUGHPUT):
            if not self.beta > 0:
                raise ConfigError(f"pathloss exponent beta must be positive, got {self.beta}")
        if kind is PotentialKind.ENERGY and not self.gamma >= 0:
            raise ConfigError("gamma must be nonnegative")
        if kind is PotentialKind.THROUGHPUT:
            if not (self.alpha >= 0 and self.p > 0 and self.r0 > 0):
                raise ConfigError("throughput needs alpha >= 0, p > 0, r0 > 0")
        if kind is PotentialKind.CONSTANT and not self.value >= 0:
            raise ConfigError("constant potential must be nonnegative")
        if kind is PotentialKind.CUSTOM:
            if self.func is None or self.declared_max is None:
                raise ConfigError("custom potential needs func and declared_max")

    @classmethod
    def energy(cls, gamma=1.0, beta=4.0):
        return cls(PotentialKind.ENERGY, gamma=gamma, beta=beta)

    @classmethod
    def throughput(cls, alpha=1.0, p=0.01, beta=4.0, r0=0.1):
        return cls(PotentialKind.THROUGHPUT, alpha=alpha, p=p, beta=beta, r0=r0)

    @classmethod
    def constant(cls, value):
        return cls(PotentialKind.CONSTANT, value=float(value))

    @classmethod
    def custom(cls, func, v_max, name="custom"):
        return cls(PotentialKind.CUSTOM, func=func, declared_max=float(v_max), name=name)

    @property
    def rate_cap(self) -> float:
        """Throughput ceiling ``alpha * log(1 + p / r0**beta)``."""
        return self.alpha * math.log1p(self.p / self.r0**self.beta)

    def __call__(self, points) -> np.ndarray:
        """Evaluate at ``points`` (no cell-membership check)."""
        pts = np.asarray(points, dtype=float)
        kind = self.kind
        if kind is PotentialKind.CUSTOM:
            return np.asarray(self.func(pts), dtype=float)
        if kind is PotentialKind.CONSTANT:
            return np.full(pts.shape[:-1], self.value)
        r = np.sqrt(np.sum(pts * pts, axis=-1))
        if kind is PotentialKind.ENERGY:
            return self.gamma * r**self.beta
        # throughput; r <= r0 (including r = 0) sits on the cap
        out = np.full(r.shape, self.rate_cap)
        far = r > self.r0
        out[far] = self.alpha * np.log1p(self.p / r[far] ** self.beta)
        return out

    def describe(self) -> dict:
        """Plain-dict summary used in output headers."""
        d = {"kind": self.kind.value}
        if self.kind is PotentialKind.ENERGY:
            d.update(gamma=self.gamma, beta=self.beta)
        elif self.kind is PotentialKind.THROUGHPUT:
            d.update(alpha=self.alpha, p=self.p, beta=self.beta, r0=self.r0)
        elif self.kind is PotentialKind.CONSTANT:
            d.update(value=self.value)
        else:
            d.update(name=self.name, declared_max=self.declared_max)
        return d


def eval_potential(pot: Potential, geom: CellGeometry, r) -> np.ndarray | float:
    """Evaluate ``pot`` at position(s) ``r``, rejecting points outside the cell."""
    pts = np.asarray(r, dtype=float)
    if pts.shape[-1:] != (geom.dimension,):
        raise DomainError(f"positions must have last axis {geom.dimension}, got shape {pts.shape}")
    if not np.all(geom.contains(pts)):
        raise DomainError(f"position outside the cell (-{geom.half}, {geom.half})^{geom.dimension}")
    out = pot(pts)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PotentialStats:
    v_min: float
    v_max: float
    v_mean: float


def check_custom_bound(pot: Potential, points: np.ndarray) -> np.ndarray:
    """Sample a potential on ``points`` and verify nonnegativity and the declared bound."""
    vals = pot(points)
    if not np.all(np.isfinite(vals)):
        raise DomainError("potential is not finite on the grid")
    if vals.min() < 0:
        raise DomainError(f"potential is negative on the grid (min {vals.min():g})")
    if pot.kind is PotentialKind.CUSTOM and vals.max() > pot.declared_max * (1 + 1e-12) + 1e-300:
        raise DomainError(
            f"custom potential exceeds its declared max {pot.declared_max:g} (sampled {vals.max():g})"
        )
    return vals


def cell_stats(pot: Potential, geom: CellGeometry, quadrature_resolution: int = 512) -> PotentialStats:
    """Extremes and cell average of ``pot``.

    The mean uses the midpoint rule on ``quadrature_resolution**d`` points.
    Extremes are exact for the built-in kinds; for a custom potential the
    minimum is the sampled one and the maximum is the declared bound.
    """
    if quadrature_resolution < 2:
        raise ConfigError("quadrature_resolution must be >= 2")
    vals = check_custom_bound(pot, midpoints(geom, quadrature_resolution))
    v_mean = math.fsum(vals) / vals.size
    kind = pot.kind
    if kind is PotentialKind.ENERGY:
        v_min, v_max = 0.0, pot.gamma * geom.r_max**pot.beta
    elif kind is PotentialKind.THROUGHPUT:
        corner = np.full((1, geom.dimension), geom.half)
        v_min, v_max = float(pot(corner)[0]), pot.rate_cap
    elif kind is PotentialKind.CONSTANT:
        v_min = v_max = v_mean = pot.value
    else:
        v_min, v_max = float(vals.min()), pot.declared_max
    return PotentialStats(v_min=v_min, v_max=v_max, v_mean=v_mean)
