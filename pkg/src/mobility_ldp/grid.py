"""Finite-difference assembly of the tilted generator ``-(D/2) lap + lam * V``.

Grids are cell-centred: ``x_i = -R/2 + (i + 1/2) h`` with ``h = R / n``, so no
point lands on the periodic seam or on a corner.  The Laplacian uses the
3-point (1D) or 5-point (2D) stencil.  Unknowns are ordered with the first
coordinate varying slowest, matching :func:`potentials.midpoints`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .potentials import CellGeometry, Potential, check_custom_bound, midpoints

MIN_POINTS = 8


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class GridSpec:
    geometry: CellGeometry
    n: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.n) != self.n or self.n < MIN_POINTS:
            raise ConfigError(f"need at least {MIN_POINTS} points per side, got {self.n}")

    @property
    def dimension(self) -> int:
        return self.geometry.dimension

    @property
    def h(self) -> float:
        return self.geometry.side_length / self.n

    @property
    def size(self) -> int:
        return self.n**self.dimension

    @property
    def cell_volume(self) -> float:
        """Quadrature weight ``h**d`` of one grid point."""
        return self.h**self.dimension

    def points(self) -> np.ndarray:
        return midpoints(self.geometry, self.n)

    def axis(self) -> np.ndarray:
        return -self.geometry.half + (np.arange(self.n) + 0.5) * self.h


def _second_difference(n: int, h: float, D: float, periodic: bool) -> sp.csr_matrix:
    """1D block of ``-(D/2) d^2/dx^2``: diagonal ``D/h^2``, neighbours ``-(D/2)/h^2``."""
    diag = D / h**2
    off = -0.5 * diag
    rows = [np.arange(n), np.arange(n - 1), np.arange(1, n)]
    cols = [np.arange(n), np.arange(1, n), np.arange(n - 1)]
    vals = [np.full(n, diag), np.full(n - 1, off), np.full(n - 1, off)]
    if periodic:
        rows += [np.array([0, n - 1])]
        cols += [np.array([n - 1, 0])]
        vals += [np.array([off, off])]
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return mat.tocsr()


def laplacian(grid: GridSpec, D: float) -> sp.csr_matrix:
    """The kinetic part ``-(D/2) lap_h`` on ``grid``."""
    periodic = grid.boundary is Boundary.PERIODIC
    t = _second_difference(grid.n, grid.h, D, periodic)
    if grid.dimension == 1:
        out = t
    else:
        eye = sp.identity(grid.n, format="csr")
        out = sp.kron(t, eye, format="csr") + sp.kron(eye, t, format="csr")
    out.sort_indices()
    return out


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse symmetric matrix of the tilted generator on one grid."""

    grid: GridSpec
    potential: Potential
    D: float
    lam: float
    potential_values: np.ndarray = field(repr=False)
    kinetic: sp.csr_matrix = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def diagonal_bounds(self) -> tuple[float, float]:
        """Range of ``lam * V`` over the grid; the spectrum starts at or above the lower end."""
        lv = self.lam * self.potential_values
        return float(lv.min()), float(lv.max())


def assemble(grid: GridSpec, pot: Potential, D: float, lam: float) -> DiscreteOperator:
    if not D > 0:
        raise ConfigError(f"diffusion constant must be positive, got {D}")
    if not math.isfinite(lam):
        raise ConfigError(f"tilt must be finite, got {lam}")
    values = check_custom_bound(pot, grid.points())
    values.setflags(write=False)
    kin = laplacian(grid, D)
    mat = (kin + sp.diags(lam * values, format="csr")).tocsr()
    mat.sort_indices()
    return DiscreteOperator(grid, pot, float(D), float(lam), values, kin, mat)


def _max_norm(points):
    return np.max(np.abs(points), axis=-1)


def free_plane_potential(kind: str, beta: float | None, halfwidth: float, dimension: int) -> Potential:
    """``|r|**beta`` (kind ``"power"``) or ``max(|x|, |y|)`` (kind ``"max"``) on ``(-L, L)^d``."""
    if kind == "power":
        if beta is None or not beta > 0:
            raise ConfigError("power potential needs beta > 0")
        return Potential.energy(gamma=1.0, beta=beta)
    if kind == "max":
        return Potential.custom(_max_norm, v_max=halfwidth, name="max_abs")
    raise ConfigError(f"unknown free-plane potential {kind!r}")


def assemble_free_plane(halfwidth: float, n: int, kind: str = "power", beta: float | None = 2.0,
                        dimension: int = 2) -> DiscreteOperator:
    """``-(1/2) lap + V`` on the box ``(-L, L)^d`` with zero Dirichlet data.

    The truncated box stands in for the whole plane; the ground state must
    have decayed well before ``|x| = L``.
    """
    geom = CellGeometry(dimension=dimension, side_length=2.0 * halfwidth)
    grid = GridSpec(geom, n, Boundary.DIRICHLET)
    return assemble(grid, free_plane_potential(kind, beta, halfwidth, dimension), D=1.0, lam=1.0)
