"""IMEX Runge-Kutta time stepping of the relaxed density/flux system.

For ``eps > 0`` each step solves, stage by stage,

    R_l  = rho^n - dt sum_k at_lk (D J_k + mu_k D2 R_k) + dt sum_k a_lk mu_k D2 R_k
    eps^2 J_l = eps^2 j^n - dt sum_k a_lk (D R_k + J_k)

(``at`` explicit, ``a`` implicit coefficients) followed by the weighted
updates. For ``eps = 0`` the flux stages collapse to ``J_l = -D R_l`` and the
scheme becomes an implicit discretisation of the heat equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .relaxation import RelaxationDiag
from .tableau import classify

__all__ = [
    "SolverError",
    "StageRecord",
    "ForwardTrajectory",
    "Stepper",
    "get_stepper",
    "imex_step",
    "imex_step_limit",
    "solve_forward",
    "stage_control_table",
    "stage_residuals",
    "linear_step_map",
]

# below this eps a non-type-A scheme would divide by eps**2
MIN_EPS_NON_TYPE_A = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass
class StageRecord:
    R: np.ndarray  # (s, m)
    J: np.ndarray  # (s, m)
    mu: np.ndarray
    u: np.ndarray  # boundary datum used by each stage


@dataclass
class ForwardTrajectory:
    rho: np.ndarray  # (N + 1, m)
    j: np.ndarray  # (N + 1, m)
    control: np.ndarray | None  # (N,) when the control is one value per step
    stage_control: np.ndarray  # (N, s)
    config: object
    stages: list | None = None

    @property
    def times(self) -> np.ndarray:
        return self.config.times

    @property
    def terminal(self) -> np.ndarray:
        return self.rho[-1]


class Stepper:
    """Per-configuration step data: operators, weights and factorised stage systems."""

    def __init__(self, config, mu=None):
        self.config = config
        self.ops = config.operators
        pair = config.scheme
        self.s = pair.s
        self.A = np.array(pair.implicit.A)
        self.At = np.array(pair.explicit.A)
        self.b = np.array(pair.implicit.weights)
        self.bt = np.array(pair.explicit.weights)
        self.dt = config.dt
        self.eps = config.eps
        info = classify(pair)
        self.type_a = info.type_a
        self.isa = info.isa
        self.limit = self.eps == 0.0
        if self.limit or mu is None:
            mu = config.relaxation_weights
        self.mu = RelaxationDiag(mu).mu
        if not self.type_a and self.eps < MIN_EPS_NON_TYPE_A:
            raise SolverError(
                f"{pair.name} is not type A; refusing to run at eps={self.eps} (< {MIN_EPS_NON_TYPE_A})"
            )
        diag = np.diag(self.A)
        self.density_systems = [self.ops.density_system(self.dt * diag[l] * self.mu[l]) for l in range(self.s)]
        eps2 = self.eps**2
        if self.limit:
            self.flux_systems = None
        else:
            self.flux_systems = [
                self.ops.flux_system(eps2 + self.dt * diag[l], self.dt * diag[l]) for l in range(self.s)
            ]
        # j^{n+1} = jn_weight * j^n + sum_k flux_weights[k] J_k  (type A)
        if self.type_a:
            self.flux_weights = np.linalg.solve(self.A.T, self.b)
            self.jn_weight = 1.0 - self.flux_weights.sum()
        else:
            self.flux_weights = None
            self.jn_weight = None

    def stage_controls(self, u) -> np.ndarray:
        """Boundary datum per stage: a scalar is held over the whole step."""
        us = np.broadcast_to(np.asarray(u, dtype=float), (self.s,))
        return np.array(us)

    def step(self, rho, j, u):
        """One step; ``u`` is a scalar or one boundary value per stage.

        Returns ``(rho_next, j_next, StageRecord)``.
        """
        ops, s, dt, A, At, mu = self.ops, self.s, self.dt, self.A, self.At, self.mu
        lap, grad_rho, grad_j = ops.laplace, ops.grad_rho, ops.grad_j
        us = self.stage_controls(u)
        m = len(rho)
        R = np.empty((s, m))
        J = np.empty((s, m))
        H = np.empty((s, m))  # D2 R_k
        F = np.empty((s, m))  # explicit density flux D J_k + mu_k D2 R_k
        G = np.empty((s, m))  # relaxation residual D R_k + J_k
        eps2 = self.eps**2
        for l in range(s):
            ul = us[l]
            rhs = rho.copy()
            for k in range(l):
                if At[l, k] != 0.0:
                    rhs -= dt * At[l, k] * F[k]
                if A[l, k] != 0.0:
                    rhs += dt * A[l, k] * mu[k] * H[k]
            rhs += dt * A[l, l] * mu[l] * lap.on_u * ul
            R[l] = self.density_systems[l].solve(rhs)
            H[l] = lap.on_rho @ R[l] + lap.on_u * ul
            if self.limit:
                J[l] = -(grad_rho.on_rho @ R[l] + grad_rho.on_u * ul)
            else:
                rhs = eps2 * j
                for k in range(l):
                    if A[l, k] != 0.0:
                        rhs = rhs - dt * A[l, k] * G[k]
                rhs = rhs - dt * A[l, l] * (grad_rho.on_rho @ R[l] + grad_rho.on_u * ul)
                J[l] = self.flux_systems[l].solve(rhs)
            F[l] = grad_j(R[l], J[l], ul) + mu[l] * H[l]
            G[l] = grad_rho(R[l], J[l], ul) + J[l]
        rho_next = rho - dt * (self.bt @ F) + dt * ((self.b * mu) @ H)
        if self.type_a:
            j_next = self.jn_weight * j + self.flux_weights @ J
        else:
            j_next = j - dt / eps2 * (self.b @ G)
        return rho_next, j_next, StageRecord(R=R, J=J, mu=mu.copy(), u=us)


@lru_cache(maxsize=64)
def get_stepper(config) -> Stepper:
    return Stepper(config)


def _stepper_for(config, M):
    if M is None:
        return get_stepper(config)
    mu = M.mu if isinstance(M, RelaxationDiag) else np.asarray(M, dtype=float)
    if np.array_equal(mu, config.relaxation_weights):
        return get_stepper(config)
    return Stepper(config, mu=mu)


def imex_step(rho_n, j_n, u_n: float, config, M=None):
    """Advance ``(rho, j)`` by one step for ``eps > 0``."""
    if config.eps == 0.0:
        raise SolverError("imex_step needs eps > 0; use imex_step_limit for the heat limit")
    grid = config.grid
    return _stepper_for(config, M).step(grid.check(rho_n, "rho"), grid.check(j_n, "j"), u_n)


def imex_step_limit(rho_n, u_n: float, config):
    """Advance the density by one step of the ``eps = 0`` scheme; returns ``(rho_next, record)``."""
    if config.eps != 0.0:
        raise SolverError("imex_step_limit is the eps = 0 scheme")
    stepper = get_stepper(config)
    if not stepper.type_a:
        raise SolverError(f"{config.scheme.name} is not type A")
    rho = config.grid.check(rho_n, "rho")
    rho_next, _, record = stepper.step(rho, np.zeros_like(rho), u_n)
    return rho_next, record


def stage_control_table(config, control) -> np.ndarray:
    """Boundary data as an ``(N, s)`` table of per-stage values.

    ``control`` is either a length-``N`` vector (one value held over each
    step), an ``(N, s)`` table, or a callable ``u(t)`` sampled at the stage
    times ``t_n + c_l dt`` of the implicit tableau.
    """
    N, s = config.n_steps, config.scheme.s
    if callable(control):
        c = np.asarray(config.scheme.implicit.nodes)
        t = config.times[:-1, None] + c[None, :] * config.dt
        return np.asarray(control(t), dtype=float).reshape(N, s)
    control = np.asarray(control, dtype=float)
    if control.ndim == 1:
        if control.shape != (N,):
            raise SolverError(f"control has {control.size} entries, expected {N}")
        return np.repeat(control[:, None], s, axis=1)
    if control.shape != (N, s):
        raise SolverError(f"stage control table has shape {control.shape}, expected {(N, s)}")
    return control


def solve_forward(config, control, record_stages: bool = False, initial=None) -> ForwardTrajectory:
    """Integrate ``N = config.n_steps`` steps; ``control[n]`` acts on step ``t_n -> t_{n+1}``.

    See :func:`stage_control_table` for the accepted control formats.
    """
    table = stage_control_table(config, control)
    rho0, j0 = config.initial_state() if initial is None else initial
    m, N = config.cells, config.n_steps
    rho = np.empty((N + 1, m))
    j = np.empty((N + 1, m))
    rho[0] = config.grid.check(rho0, "rho0")
    j[0] = config.grid.check(j0, "j0")
    stages = [] if record_stages else None
    if N:
        stepper = get_stepper(config)
    for n in range(N):
        try:
            rho[n + 1], j[n + 1], record = stepper.step(rho[n], j[n], table[n])
        except Exception as exc:
            raise SolverError(f"forward step {n} failed: {exc}") from exc
        if not (np.all(np.isfinite(rho[n + 1])) and np.all(np.isfinite(j[n + 1]))):
            raise SolverError(f"forward step {n} produced non-finite values")
        if record_stages:
            stages.append(record)
    per_step = None if callable(control) else np.asarray(control, dtype=float)
    if per_step is not None and per_step.ndim != 1:
        per_step = None
    return ForwardTrajectory(rho=rho, j=j, control=per_step, stage_control=table, config=config, stages=stages)


def stage_residuals(rho_n, j_n, config, record: StageRecord, rho_next, j_next) -> float:
    """Largest relative residual of the defining stage and update equations."""
    ops = config.operators
    pair = config.scheme
    A, At = pair.implicit.A, pair.explicit.A
    b, bt = pair.implicit.weights, pair.explicit.weights
    dt, eps2, mu, u = config.dt, config.eps**2, record.mu, record.u
    R, J = record.R, record.J
    s = len(mu)
    H = np.array([ops.laplace.on_rho @ R[l] + ops.laplace.on_u * u[l] for l in range(s)])
    DJ = np.array([ops.grad_j(R[l], J[l], u[l]) for l in range(s)])
    DR = np.array([ops.grad_rho(R[l], J[l], u[l]) for l in range(s)])
    scale = max(np.max(np.abs(rho_n)), np.max(np.abs(j_n)), np.max(np.abs(R)), np.max(np.abs(J)), 1e-300)
    expl = DJ + mu[:, None] * H
    impl = mu[:, None] * H
    worst = 0.0
    for l in range(s):
        r = R[l] - (rho_n - dt * At[l] @ expl + dt * A[l] @ impl)
        worst = max(worst, np.max(np.abs(r)))
        if config.eps == 0.0:
            r = J[l] + DR[l]
        else:
            r = eps2 * J[l] - (eps2 * j_n - dt * A[l] @ (DR + J))
        worst = max(worst, np.max(np.abs(r)))
    r = rho_next - (rho_n - dt * bt @ expl + dt * b @ impl)
    worst = max(worst, np.max(np.abs(r)))
    if config.eps > 0.0:
        r = eps2 * j_next - (eps2 * j_n - dt * b @ (DR + J))
        worst = max(worst, np.max(np.abs(r)))
    return worst / scale


@lru_cache(maxsize=64)
def linear_step_map(config):
    """The affine step map ``x -> S x + g u`` on ``x = (rho, j)`` as dense arrays.

    Obtained by pushing unit vectors through :meth:`Stepper.step`, so it is the
    same discretisation; its transpose is the exact discrete adjoint step.
    """
    stepper = get_stepper(config)
    m = config.cells
    S = np.empty((2 * m, 2 * m))
    zero = np.zeros(m)
    basis = np.eye(m)
    for i in range(m):
        r, jj, _ = stepper.step(basis[i], zero, 0.0)
        S[:m, i], S[m:, i] = r, jj
        r, jj, _ = stepper.step(zero, basis[i], 0.0)
        S[:m, m + i], S[m:, m + i] = r, jj
    r, jj, _ = stepper.step(zero, zero, 1.0)
    g = np.concatenate([r, jj])
    S.flags.writeable = False
    g.flags.writeable = False
    return S, g
