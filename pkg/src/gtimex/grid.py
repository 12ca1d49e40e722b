"""Cell-centred grid on [0, 1], ghost-cell closures and difference stencils.

Boundary traces are the mean of the last interior cell and its ghost,
one-sided derivatives are ``(ghost - last) / dx`` on the right and
``(first - ghost) / dx`` on the left. Every closure is therefore a 1x1
linear equation for the ghost value and the map ``(rho, j, u) -> ghosts``
is affine with constant coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid1D",
    "GridError",
    "ClosureError",
    "BoundaryClosure",
    "DEFAULT_CLOSURES",
    "Ghosts",
    "ghost_values",
    "d_central",
    "d_second",
    "blended_gradient",
    "phi_policy",
    "PHI_OVERRIDES",
]


class GridError(ValueError):
    pass


class ClosureError(ValueError):
    """Inconsistent or incomplete set of boundary closures."""


@dataclass(frozen=True)
class Grid1D:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise GridError(f"cell count must be a positive integer, got {self.m!r}")

    @property
    def dx(self) -> float:
        return 1.0 / self.m

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(1, self.m + 1) - 0.5) * self.dx

    def check(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.m,):
            raise GridError(f"{name} has shape {values.shape}, grid has {self.m} cells")
        return values


@dataclass(frozen=True)
class BoundaryClosure:
    """``trace * f(side) + deriv * f_x(side) = control * u + rho_trace * rho(side)``.

    ``rho_trace`` couples a closure on ``j`` to the density trace, which is
    how the kinetic condition ``j(1) - rho(1) = -u`` is written.
    """

    side: str
    field: str
    kind: str
    trace: float = 0.0
    deriv: float = 0.0
    control: float = 0.0
    rho_trace: float = 0.0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ClosureError(f"unknown side {self.side!r}")
        if self.field not in ("rho", "j"):
            raise ClosureError(f"unknown field {self.field!r}")
        if self.field == "rho" and self.rho_trace != 0.0:
            raise ClosureError("a density closure cannot refer to the density trace")
        if self.trace == 0.0 and self.deriv == 0.0:
            raise ClosureError(f"{self.side} {self.field} closure constrains nothing")


# Density ghosts come from j = -rho_x combined with the kinetic conditions
# (rho_x(0) = 0, rho_x(1) + rho(1) = u); flux ghosts from the kinetic
# conditions j(0) = 0, j(1) = rho(1) - u.
DEFAULT_CLOSURES = (
    BoundaryClosure("left", "rho", "neumann", deriv=1.0),
    BoundaryClosure("right", "rho", "robin", trace=1.0, deriv=1.0, control=1.0),
    BoundaryClosure("left", "j", "kinetic", trace=1.0),
    BoundaryClosure("right", "j", "kinetic", trace=1.0, control=-1.0, rho_trace=1.0),
)


def _index_closures(closures) -> dict:
    table = {}
    for cl in closures:
        key = (cl.side, cl.field)
        if key in table:
            raise ClosureError(f"conflicting closures for {cl.field} on the {cl.side} boundary")
        table[key] = cl
    missing = {(s, f) for s in ("left", "right") for f in ("rho", "j")} - set(table)
    if missing:
        side, fld = sorted(missing)[0]
        raise ClosureError(f"no closure for {fld} on the {side} boundary")
    return table


def _solve_ghost(cl: BoundaryClosure, f_b, rhs, dx: float):
    sign = 1.0 if cl.side == "right" else -1.0
    coef = 0.5 * cl.trace + sign * cl.deriv / dx
    if coef == 0.0:
        raise ClosureError(f"{cl.side} {cl.field} closure does not determine a ghost value")
    return (rhs - f_b * (0.5 * cl.trace - sign * cl.deriv / dx)) / coef


@dataclass(frozen=True)
class Ghosts:
    rho_left: float
    rho_right: float
    j_left: float
    j_right: float


def ghost_values(rho, j, u: float, dx: float, closures=DEFAULT_CLOSURES) -> Ghosts:
    """Ghost cells for both fields on both ends.

    ``j`` may be ``None`` when only density ghosts are needed (heat limit);
    the flux ghosts are then returned as NaN.
    """
    table = _index_closures(closures)
    out = {}
    for side, idx in (("left", 0), ("right", -1)):
        cl = table[(side, "rho")]
        g_rho = _solve_ghost(cl, rho[idx], cl.control * u, dx)
        out[f"rho_{side}"] = g_rho
        cl = table[(side, "j")]
        if j is None:
            out[f"j_{side}"] = np.nan
            continue
        rho_trace = 0.5 * (g_rho + rho[idx])
        out[f"j_{side}"] = _solve_ghost(cl, j[idx], cl.control * u + cl.rho_trace * rho_trace, dx)
    return Ghosts(**out)


def _pad(f, left, right):
    f = np.asarray(f, dtype=float)
    return np.concatenate(([left], f, [right]))


def d_central(f, dx: float, left: float, right: float) -> np.ndarray:
    """``(f[i+1] - f[i-1]) / (2 dx)`` with ghost values at both ends."""
    if len(f) < 3:
        raise GridError("central differences need at least 3 cells")
    g = _pad(f, left, right)
    return (g[2:] - g[:-2]) / (2.0 * dx)


def d_second(f, dx: float, left: float, right: float) -> np.ndarray:
    if len(f) < 3:
        raise GridError("second differences need at least 3 cells")
    g = _pad(f, left, right)
    return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx**2


def blended_gradient(rho, j, eps: float, phi: float, dx: float, ghosts: Ghosts):
    """Convex blend of central and upwind-corrected derivatives of ``(rho, j)``.

    Returns ``(D rho, D j)`` with

        D rho = D^c rho - (1 - phi) (eps dx / 2) D^2 j
        D j   = D^c j   - (1 - phi) (dx / (2 eps)) D^2 rho

    The upwind correction is skipped entirely when ``phi == 1``.
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    d_rho = d_central(rho, dx, ghosts.rho_left, ghosts.rho_right)
    d_j = d_central(j, dx, ghosts.j_left, ghosts.j_right)
    weight = 1.0 - phi
    if weight == 0.0:
        return d_rho, d_j
    if eps == 0.0:
        raise ZeroDivisionError("upwind blend needs eps > 0 when phi < 1")
    d_rho = d_rho - weight * 0.5 * eps * dx * d_second(j, dx, ghosts.j_left, ghosts.j_right)
    d_j = d_j - weight * 0.5 * dx / eps * d_second(rho, dx, ghosts.rho_left, ghosts.rho_right)
    return d_rho, d_j


PHI_OVERRIDES = {("GSA342", 1.0): 0.3, ("SSP2332", 0.5): 0.385}


def phi_policy(eps: float, scheme: str | None = None) -> float:
    """Blend weight: tabulated overrides, otherwise ``1 - eps**3``."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if scheme is not None:
        override = PHI_OVERRIDES.get((scheme.upper(), float(eps)))
        if override is not None:
            return override
    return 1.0 - eps**3
