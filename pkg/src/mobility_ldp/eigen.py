"""Ground state of a :class:`~mobility_ldp.grid.DiscreteOperator`.

The default route runs Lanczos on ``(M - sigma)^{-1}`` where ``sigma`` sits
strictly below the spectrum of ``M``, so the wanted eigenvalue is the
dominant one of the inverse and converges in a few dozen solves.  ``M -
sigma`` is a strictly diagonally dominant M-matrix; its LU factors are
computed without pivoting, which keeps a final inverse step on a
nonnegative vector entrywise positive.  The ``"lanczos"`` route applies the
same iteration to ``M`` itself and needs only matrix-vector products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ConvergenceError
from .grid import DiscreteOperator

DEFAULT_TOL = 1e-10
BASIS_SIZE = 64


@dataclass(frozen=True)
class EigenResult:
    """Ground eigenpair plus the functionals used downstream.

    ``phi0`` is normalised in the grid measure, ``sum(phi0**2) * h**d == 1``,
    and has positive mean.  ``gap`` is ``eps1 - eps0`` when requested.
    """

    eps0: float
    phi0: np.ndarray
    theta0: float
    vexp: float
    iterations: int
    residual_norm: float
    lam: float
    cell_volume: float
    gap: Optional[float] = None


def _orthogonalize(Q, r):
    # two passes of classical Gram-Schmidt
    r = r - Q @ (Q.T @ r)
    return r - Q @ (Q.T @ r)


def lanczos(apply: Callable[[np.ndarray], np.ndarray], v0: np.ndarray, *, nev: int = 1,
            largest: bool = False, basis_size: int = BASIS_SIZE, max_iter: int = 2000,
            residuals: Callable[[np.ndarray], np.ndarray], tol: float = DEFAULT_TOL,
            seed: int = 0):
    """Thick-restart Lanczos with full reorthogonalisation.

    Ritz pairs come from the projection of ``apply`` onto the stored basis.
    ``residuals(vectors)`` scores candidate Ritz vectors (columns) and the
    iteration stops once every score is ``<= tol``.  Returns
    ``(vectors, iterations, scores)``.  Raises :class:`ConvergenceError`
    after ``max_iter`` operator applications.
    """
    n = v0.size
    if basis_size < nev + 2:
        raise ConfigError("basis_size too small for the requested eigenpairs")
    basis_size = min(basis_size, n)
    Q = np.empty((n, basis_size))
    W = np.empty((n, basis_size))
    Q[:, 0] = v0 / np.linalg.norm(v0)
    W[:, 0] = apply(Q[:, 0])
    k = 1
    iters = 1
    fallback = np.random.default_rng(seed)
    best = np.inf
    keep = max(nev + 1, basis_size // 2)
    exhausted = False
    while True:
        H = Q[:, :k].T @ W[:, :k]
        H = 0.5 * (H + H.T)
        theta, Y = np.linalg.eigh(H)
        order = np.argsort(-theta if largest else theta, kind="stable")
        if k >= nev:
            vecs = Q[:, :k] @ Y[:, order[:nev]]
            scores = residuals(vecs)
            best = min(best, float(np.max(scores)))
            if np.max(scores) <= tol or exhausted:
                return vecs, iters, scores
        if iters >= max_iter:
            raise ConvergenceError(
                f"Lanczos stopped after {iters} applications, best residual {best:.3e}", residual=best
            )
        if k == basis_size:
            m = min(keep, k - 1)
            Ysel = Y[:, order[:m]]
            Q[:, :m] = Q[:, :k] @ Ysel
            W[:, :m] = W[:, :k] @ Ysel
            k = m
        w = W[:, k - 1]
        r = _orthogonalize(Q[:, :k], w)
        beta = np.linalg.norm(r)
        if beta <= 1e-13 * max(np.linalg.norm(w), 1e-300):
            # invariant subspace; done if it already holds enough vectors
            if k >= nev:
                exhausted = True
                continue
            r = _orthogonalize(Q[:, :k], fallback.standard_normal(n))
            beta = np.linalg.norm(r)
        Q[:, k] = r / beta
        W[:, k] = apply(Q[:, k])
        k += 1
        iters += 1


def _rayleigh(matrix, vecs):
    mv = matrix @ vecs
    eps = np.einsum("ij,ij->j", vecs, mv)
    res = np.linalg.norm(mv - vecs * eps, axis=0)
    return eps, res


def residual_floor(mat) -> float:
    norm_inf = float(abs(mat).sum(axis=1).max())
    return 8.0 * np.finfo(float).eps * norm_inf


def _factorize(shifted):
    lu = spla.splu(shifted.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    return lu.solve


def spectral_floor(op: DiscreteOperator) -> float:
    """Lower bound of the spectrum: the kinetic part is positive semidefinite."""
    return op.diagonal_bounds()[0]


def min_eig(op: DiscreteOperator, tol: float = DEFAULT_TOL, max_iter: int = 2000,
            method: str = "shift-invert", nev: int = 1, basis_size: int = BASIS_SIZE) -> EigenResult:
    """Smallest eigenvalue and positive ground state of ``op``.

    ``tol`` bounds ``||M phi - eps phi||`` for the unit-norm eigenvector.
    It is floored at ``8 * eps_mach * ||M||_inf``, below which the residual
    cannot be evaluated reliably (fine 1D grids reach this floor).
    ``nev=2`` also converges the next eigenvalue and fills ``gap``.
    """
    if not tol > 0:
        raise ConfigError("tol must be positive")
    mat = op.matrix
    tol = max(tol, residual_floor(mat))
    n = mat.shape[0]
    v0 = np.ones(n)
    if nev > 1:
        # the constant vector only sees the fully symmetric sector
        v0 = v0 + 1e-2 * np.random.default_rng(12345).standard_normal(n)

    def residuals(vecs):
        return _rayleigh(mat, vecs / np.linalg.norm(vecs, axis=0))[1]

    solve = None
    if method == "shift-invert":
        geom = op.grid.geometry
        sigma = spectral_floor(op) - op.D / geom.side_length**2
        shifted = mat - sigma * _identity_like(mat)
        solve = _factorize(shifted)
        apply, largest = solve, True
    elif method == "lanczos":
        apply, largest = (lambda v: mat @ v), False
    else:
        raise ConfigError(f"unknown eigensolver method {method!r}")

    try:
        vecs, iters, _ = lanczos(apply, v0, nev=nev, largest=largest, basis_size=basis_size,
                                 max_iter=max_iter, residuals=residuals, tol=tol)
    except ConvergenceError as exc:
        raise ConvergenceError(f"lam={op.lam:g}: {exc}", residual=exc.residual, lam=op.lam) from None

    vecs = vecs / np.linalg.norm(vecs, axis=0)
    eps, _ = _rayleigh(mat, vecs)
    order = np.argsort(eps, kind="stable")
    vecs, eps = vecs[:, order], eps[order]
    phi = vecs[:, 0]
    if phi.sum() < 0:
        phi = -phi
    if solve is not None and phi.min() <= 0:
        # one inverse step from |phi|: the inverse of an M-matrix is entrywise positive
        phi = solve(np.abs(phi))
        phi /= np.linalg.norm(phi)
    eps0_arr, res_arr = _rayleigh(mat, phi[:, None])
    eps0, res = float(eps0_arr[0]), float(res_arr[0])
    if res > tol:
        raise ConvergenceError(f"lam={op.lam:g}: final residual {res:.3e} above tol", residual=res, lam=op.lam)

    dv = op.grid.cell_volume
    phi0 = phi / math.sqrt(dv)
    theta0 = math.fsum(phi0) * dv
    vexp = math.fsum(op.potential_values * phi * phi)
    phi0.setflags(write=False)
    gap = float(eps[1] - eps0) if nev > 1 else None
    return EigenResult(eps0=eps0, phi0=phi0, theta0=theta0, vexp=vexp, iterations=iters,
                       residual_norm=res, lam=op.lam, cell_volume=dv, gap=gap)


def _identity_like(mat):
    return sp.identity(mat.shape[0], format="csr", dtype=mat.dtype)


def eps0_derivative(result: EigenResult) -> float:
    """Slope of the ground eigenvalue in the tilt, ``<phi0|V|phi0>``."""
    return result.vexp
