"""Objective, reduced gradient, box projection and the projected-gradient loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointTrajectory
from .forward import ForwardTrajectory, linear_step_map

__all__ = [
    "StaleAdjointError",
    "OptimizeReport",
    "ReducedProblem",
    "objective",
    "reduced_gradient",
    "project_box",
    "stationarity",
    "optimize",
]

logger = logging.getLogger(__name__)

STOP_TOL = 1e-6
MAX_ITER = 10_000
ARMIJO_C = 1e-4


class StaleAdjointError(ValueError):
    """The adjoint was computed for a different control."""


def objective(traj: ForwardTrajectory, u, config) -> float:
    """``dx/2 sum (rho^N - rho_d)^2 + dt nu/2 sum u_n^2``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (config.n_steps,):
        raise ValueError(f"control has {u.size} entries, expected {config.n_steps}")
    if traj.rho.shape != (config.n_steps + 1, config.cells):
        raise ValueError("trajectory does not match the configuration")
    misfit = traj.rho[-1] - config.target()
    return 0.5 * config.dx * float(misfit @ misfit) + 0.5 * config.dt * config.nu * float(u @ u)


def reduced_gradient(u, adj: AdjointTrajectory, config) -> np.ndarray:
    """Exact gradient of the discrete reduced objective for a per-step control."""
    u = np.asarray(u, dtype=float)
    if adj.control is not None and not np.array_equal(adj.control, u):
        raise StaleAdjointError("adjoint trajectory belongs to a different control")
    if adj.control_sensitivity.shape[0] != u.size:
        raise StaleAdjointError("adjoint trajectory has the wrong number of steps")
    return config.dt * config.nu * u + adj.control_sensitivity.sum(axis=1)


def project_box(v, u_lo, u_hi) -> np.ndarray:
    if np.any(np.asarray(u_lo) > np.asarray(u_hi)):
        raise ValueError(f"inverted bounds [{u_lo}, {u_hi}]")
    return np.clip(np.asarray(v, dtype=float), u_lo, u_hi)


def stationarity(u, grad, config) -> float:
    """Discrete L2(0, T) norm of ``u - P(u - grad)``."""
    r = u - project_box(u - grad, config.u_lo, config.u_hi)
    return math.sqrt(config.dt) * float(np.linalg.norm(r))


class ReducedProblem:
    """Reduced objective ``J(u)`` evaluated with the compiled affine step map.

    The backward sweep applies the transposed step map, which is the same
    linear map as :func:`gtimex.adjoint.reverse_step`, at a fraction of the cost.
    """

    def __init__(self, config, target=None):
        self.config = config
        self.S, self.g = linear_step_map(config)
        self.ST = np.ascontiguousarray(self.S.T)
        rho0, j0 = config.initial_state()
        self.x0 = np.concatenate([rho0, j0])
        self.target = config.target() if target is None else config.grid.check(target, "target")
        self.m = config.cells
        self.n_forward = 0
        self.n_adjoint = 0

    def terminal(self, u) -> np.ndarray:
        x = self.x0
        S, g = self.S, self.g
        for un in u:
            x = S @ x + g * un
        self.n_forward += 1
        return x

    def value(self, u, terminal=None) -> float:
        cfg = self.config
        x = self.terminal(u) if terminal is None else terminal
        misfit = x[: self.m] - self.target
        return 0.5 * cfg.dx * float(misfit @ misfit) + 0.5 * cfg.dt * cfg.nu * float(u @ u)

    def gradient(self, u, terminal=None) -> np.ndarray:
        cfg = self.config
        x = self.terminal(u) if terminal is None else terminal
        lam = np.zeros(2 * self.m)
        lam[: self.m] = cfg.dx * (x[: self.m] - self.target)
        grad = cfg.dt * cfg.nu * np.asarray(u, dtype=float)
        ST, g = self.ST, self.g
        for n in reversed(range(len(u))):
            grad[n] += g @ lam
            lam = ST @ lam
        self.n_adjoint += 1
        return grad


@dataclass
class OptimizeReport:
    u_star: np.ndarray
    j_star: float
    iterations: int
    converged: bool
    grad_norm_history: list = field(default_factory=list)
    j_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    final_stationarity: float = float("nan")

    def trace_rows(self):
        for k, (jv, gn, st) in enumerate(zip(self.j_history, self.grad_norm_history, self.step_history)):
            yield k, jv, gn, st


def optimize(config, u0=None, tol: float = STOP_TOL, max_iter: int = MAX_ITER, target=None) -> OptimizeReport:
    """Projected gradient descent with Armijo backtracking.

    Each iteration tries twice the last accepted step, halving until the
    Armijo condition holds. Stops when the projected-gradient stationarity
    measure drops to ``tol`` or after ``max_iter`` iterations.

    Parameters
    ----------
    config : ProblemConfig
    u0 : array_like, optional
        Initial control, one value per step (default zero); projected onto the box.
    target : array_like, optional
        Replaces the configured target state ``rho_d``.
    """
    problem = ReducedProblem(config, target)
    N = config.n_steps
    u = np.zeros(N) if u0 is None else np.asarray(u0, dtype=float).copy()
    u = project_box(u, config.u_lo, config.u_hi)
    xT = problem.terminal(u)
    J = problem.value(u, xT)
    grad = problem.gradient(u, xT)
    step = 1.0
    report = OptimizeReport(u_star=u, j_star=J, iterations=0, converged=False)
    for it in range(max_iter + 1):
        measure = stationarity(u, grad, config)
        report.j_history.append(J)
        report.grad_norm_history.append(measure)
        report.step_history.append(step if it else 0.0)
        if measure <= tol:
            report.converged = True
            break
        if it == max_iter:
            break
        trial = min(2.0 * step, 1e12)
        while True:
            u_new = project_box(u - trial * grad, config.u_lo, config.u_hi)
            x_new = problem.terminal(u_new)
            J_new = problem.value(u_new, x_new)
            if J_new <= J + ARMIJO_C * float(grad @ (u_new - u)):
                break
            trial *= 0.5
            if trial < 1e-300:
                logger.warning("line search failed at iteration %d", it)
                report.iterations = it
                report.u_star, report.j_star, report.final_stationarity = u, J, measure
                return report
        step = trial
        u, J, xT = u_new, J_new, x_new
        grad = problem.gradient(u, xT)
        report.iterations = it + 1
    report.u_star = u
    report.j_star = J
    report.final_stationarity = report.grad_norm_history[-1]
    return report
