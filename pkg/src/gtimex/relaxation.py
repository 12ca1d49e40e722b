"""Stage relaxation weights splitting the diffusion term into explicit and implicit parts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tableau import IMEXPair

__all__ = ["RelaxationDiag", "optimal_relaxation", "mu_exponential", "verify_chapman_enskog", "RelaxationError"]


class RelaxationError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxationDiag:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if np.any(mu < 0) or np.any(mu > 1):
            raise RelaxationError("relaxation weights must lie in [0, 1]")
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.mu)


def optimal_relaxation(pair: IMEXPair, eps: float, dt: float) -> RelaxationDiag:
    """``mu_l = dt a_ll / (eps**2 + dt a_ll)``.

    This choice makes ``J_l + mu_l d_x R_l`` vanish to second order in ``eps``
    for a type A scheme; it depends on the stage only, not the step.
    """
    if eps < 0:
        raise RelaxationError(f"eps must be nonnegative, got {eps}")
    if not dt > 0:
        raise RelaxationError(f"dt must be positive, got {dt}")
    diag = np.diag(pair.implicit.A)
    for stage, a_ll in enumerate(diag, start=1):
        if not a_ll > 0:
            raise RelaxationError(
                f"{pair.name} is not type A with positive diagonal: a_{stage}{stage} = {a_ll}"
            )
    return RelaxationDiag(dt * diag / (eps**2 + dt * diag))


def mu_exponential(eps: float, dx: float) -> float:
    if not dx > 0:
        raise RelaxationError(f"dx must be positive, got {dx}")
    if eps < 0:
        raise RelaxationError(f"eps must be nonnegative, got {eps}")
    return math.exp(-eps / dx)


def chapman_enskog_residual(config, record, interior_margin: int = 2) -> float:
    """Max over stages of ``|J_l + mu_l D rho(R_l, J_l)|`` away from the boundaries."""
    ops = config.operators
    mu = record.mu
    worst = 0.0
    sl = slice(interior_margin, config.cells - interior_margin)
    for l in range(len(mu)):
        R, J = record.R[l], record.J[l]
        res = J + mu[l] * ops.grad_rho(R, J, record.u[l])
        worst = max(worst, float(np.max(np.abs(res[sl]))))
    return worst


def verify_chapman_enskog(pair: IMEXPair, config, eps_list, control: float = 0.0) -> list[float]:
    """One forward step per ``eps`` with optimal weights; returns the stage residuals.

    The two cells next to each boundary are excluded from the norm.
    """
    from .forward import imex_step

    if len(eps_list) == 0:
        raise ValueError("eps_list is empty")
    out = []
    for eps in eps_list:
        if not eps > 0:
            raise RelaxationError(f"eps must be positive, got {eps}")
        cfg = config.with_(eps=float(eps), scheme=pair, relaxation="optimal")
        rho, j = cfg.initial_state()
        _, _, record = imex_step(rho, j, control, cfg)
        out.append(chapman_enskog_residual(cfg, record))
    return out
