"""Assembled spatial operators and tridiagonal solves.

The stencils in :mod:`gtimex.grid` are affine in ``(rho, j, u)``. Here they are
probed column by column to obtain the matrices and control vectors used by the
time steppers, so forward and adjoint solvers share one exact discretisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .grid import DEFAULT_CLOSURES, Grid1D, blended_gradient, d_second, ghost_values

__all__ = ["Tridiagonal", "AffineOperator", "SpatialOperators"]


class Tridiagonal:
    """A tridiagonal matrix with direct solves for it and its transpose."""

    def __init__(self, lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
        n = len(diag)
        self.n = n
        self._ab = np.zeros((3, n))
        self._ab[0, 1:] = upper
        self._ab[1] = diag
        self._ab[2, :-1] = lower
        self._abt = np.zeros((3, n))
        self._abt[0, 1:] = lower
        self._abt[1] = diag
        self._abt[2, :-1] = upper

    @classmethod
    def from_matrix(cls, mat) -> "Tridiagonal":
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)
        band = np.triu(np.tril(dense, 1), -1)
        if not np.array_equal(band, dense):
            raise ValueError("matrix has entries outside the tridiagonal band")
        return cls(np.diag(dense, -1).copy(), np.diag(dense).copy(), np.diag(dense, 1).copy())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self._ab, rhs, check_finite=False)

    def solve_transposed(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self._abt, rhs, check_finite=False)

    def toarray(self) -> np.ndarray:
        n = self.n
        out = np.diag(self._ab[1])
        if n > 1:
            out += np.diag(self._ab[0, 1:], 1) + np.diag(self._ab[2, :-1], -1)
        return out


@dataclass(frozen=True)
class AffineOperator:
    """``x -> on_rho @ rho + on_j @ j + on_u * u``."""

    on_rho: sp.csr_matrix
    on_j: sp.csr_matrix
    on_u: np.ndarray

    def __call__(self, rho, j, u: float) -> np.ndarray:
        return self.on_rho @ rho + self.on_j @ j + self.on_u * u


def _probe(fn, m: int):
    """Matrices of an affine map ``fn(rho, j, u)`` that vanishes at zero."""
    zero = np.zeros(m)
    on_rho = np.empty((m, m))
    on_j = np.empty((m, m))
    basis = np.eye(m)
    for i in range(m):
        on_rho[:, i] = fn(basis[i], zero, 0.0)
        on_j[:, i] = fn(zero, basis[i], 0.0)
    on_u = fn(zero, zero, 1.0)
    return AffineOperator(sp.csr_matrix(on_rho), sp.csr_matrix(on_j), on_u)


class SpatialOperators:
    """Discrete operators for one ``(grid, eps, phi)`` combination.

    Attributes
    ----------
    laplace : AffineOperator
        ``D^2 rho`` with the density ghosts (acts on rho and u only).
    grad_rho : AffineOperator
        Blended derivative of the density (the ``d_x R`` in the flux equation).
    grad_j : AffineOperator
        Blended derivative of the flux (the ``d_x J`` in the density equation).
    """

    def __init__(self, grid: Grid1D, eps: float, phi: float, closures=DEFAULT_CLOSURES):
        if grid.m < 3:
            raise ValueError("the solver needs at least 3 cells")
        self.grid = grid
        self.eps = float(eps)
        self.phi = float(phi)
        self.closures = tuple(closures)
        dx = grid.dx
        m = grid.m

        def laplace(rho, j, u):
            g = ghost_values(rho, None, u, dx, self.closures)
            return d_second(rho, dx, g.rho_left, g.rho_right)

        def grads(rho, j, u):
            g = ghost_values(rho, j, u, dx, self.closures)
            return blended_gradient(rho, j, self.eps, self.phi, dx, g)

        self.laplace = _probe(laplace, m)
        self.grad_rho = _probe(lambda r, j, u: grads(r, j, u)[0], m)
        self.grad_j = _probe(lambda r, j, u: grads(r, j, u)[1], m)
        self._identity = sp.identity(m, format="csr")

    def density_system(self, gamma: float) -> Tridiagonal:
        """``I - gamma D^2`` for the implicit density stages."""
        return Tridiagonal.from_matrix(self._identity - gamma * self.laplace.on_rho)

    def flux_system(self, diag_coef: float, grad_coef: float) -> Tridiagonal:
        """``diag_coef I + grad_coef * (j-part of the blended density derivative)``."""
        return Tridiagonal.from_matrix(diag_coef * self._identity + grad_coef * self.grad_rho.on_j)
