"""Backward (adjoint) integration for the discrete control problem.

The adjoint step is the exact algebraic transpose of :meth:`Stepper.step`:
stages are visited in reverse order and every stage solve is replaced by a
solve with the transposed tridiagonal matrix. Multipliers are reported in the
units of the continuous optimality system, ``p = lam_rho / dx`` and
``q = lam_j / (dx eps**2)``, so that ``p^N = rho^N - rho_d`` and ``q^N = 0``.

For ``eps = 0`` two further arrangements of the backward stage equations are
provided: one keeping the algebraic flux multipliers ``Q`` (solved by
triangular back-substitution, which needs an invertible implicit matrix) and
one in the transformed variable ``Qbar = dt A^T Q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import SolverError, get_stepper
from .relaxation import RelaxationDiag
from .tableau import classify

__all__ = [
    "AdjointStageRecord",
    "AdjointTrajectory",
    "terminal_condition",
    "reverse_step",
    "adjoint_step",
    "adjoint_step_limit",
    "adjoint_step_limit_transformed",
    "solve_adjoint",
]


@dataclass
class AdjointStageRecord:
    P: np.ndarray  # (s, m) density stage multipliers
    Q: np.ndarray  # (s, m) flux stage multipliers (Qbar in the transformed eps = 0 form)
    control_sensitivity: np.ndarray | None = None  # (s,) d objective / d stage boundary value


@dataclass
class AdjointTrajectory:
    p: np.ndarray  # (N + 1, m)
    q: np.ndarray  # (N + 1, m)
    control_sensitivity: np.ndarray  # (N, s)
    config: object
    control: np.ndarray | None = None
    stages: list | None = None


def terminal_condition(rho_T, rho_d):
    rho_T = np.asarray(rho_T, dtype=float)
    rho_d = np.asarray(rho_d, dtype=float)
    if rho_T.shape != rho_d.shape:
        raise ValueError(f"terminal state {rho_T.shape} and target {rho_d.shape} live on different grids")
    return rho_T - rho_d, np.zeros_like(rho_T)


def reverse_step(stepper, lam_rho, lam_j):
    """Transpose of one forward step in Euclidean pairing.

    Returns ``(lam_rho_n, lam_j_n, X, Y, ubar)`` where ``X``/``Y`` are the
    multipliers of the density/flux stage equations and ``ubar[l]`` is the
    derivative with respect to the boundary value used in stage ``l``.
    """
    ops = stepper.ops
    s, dt, A, At, mu = stepper.s, stepper.dt, stepper.A, stepper.At, stepper.mu
    lap, gr, gj = ops.laplace, ops.grad_rho, ops.grad_j
    eps2 = stepper.eps**2
    m = len(lam_rho)
    rho_bar = np.array(lam_rho, dtype=float)
    F_bar = -dt * stepper.bt[:, None] * lam_rho[None, :]
    H_bar = dt * (stepper.b * mu)[:, None] * lam_rho[None, :]
    G_bar = np.zeros((s, m))
    if stepper.type_a:
        j_bar = stepper.jn_weight * lam_j
        J_bar = stepper.flux_weights[:, None] * lam_j[None, :]
    else:
        j_bar = np.array(lam_j, dtype=float)
        J_bar = np.zeros((s, m))
        G_bar -= dt / eps2 * stepper.b[:, None] * lam_j[None, :]
    R_bar = np.zeros((s, m))
    X = np.zeros((s, m))
    Y = np.zeros((s, m))
    ubar = np.zeros(s)
    for l in reversed(range(s)):
        R_bar[l] += gj.on_rho.T @ F_bar[l] + gr.on_rho.T @ G_bar[l]
        J_bar[l] += gj.on_j.T @ F_bar[l] + gr.on_j.T @ G_bar[l] + G_bar[l]
        H_bar[l] += mu[l] * F_bar[l]
        ubar[l] += gj.on_u @ F_bar[l] + gr.on_u @ G_bar[l]
        if stepper.limit:
            Y[l] = J_bar[l]
            R_bar[l] -= gr.on_rho.T @ Y[l]
            ubar[l] -= gr.on_u @ Y[l]
        else:
            Y[l] = stepper.flux_systems[l].solve_transposed(J_bar[l])
            j_bar = j_bar + eps2 * Y[l]
            for k in range(l):
                if A[l, k] != 0.0:
                    G_bar[k] -= dt * A[l, k] * Y[l]
            R_bar[l] -= dt * A[l, l] * (gr.on_rho.T @ Y[l])
            ubar[l] -= dt * A[l, l] * (gr.on_u @ Y[l])
        R_bar[l] += lap.on_rho.T @ H_bar[l]
        ubar[l] += lap.on_u @ H_bar[l]
        X[l] = stepper.density_systems[l].solve_transposed(R_bar[l])
        rho_bar += X[l]
        for k in range(l):
            if At[l, k] != 0.0:
                F_bar[k] -= dt * At[l, k] * X[l]
            if A[l, k] != 0.0:
                H_bar[k] += dt * A[l, k] * mu[k] * X[l]
        ubar[l] += dt * A[l, l] * mu[l] * (lap.on_u @ X[l])
    return rho_bar, j_bar, X, Y, ubar


def _stepper(config, M=None):
    if M is None:
        return get_stepper(config)
    from .forward import _stepper_for

    return _stepper_for(config, M)


def adjoint_step(p_next, q_next, config, M: RelaxationDiag | None = None):
    """One backward step for ``eps > 0``; returns ``(p_n, q_n, AdjointStageRecord)``."""
    if config.eps == 0.0:
        raise SolverError("adjoint_step needs eps > 0; use adjoint_step_limit for the heat limit")
    stepper = _stepper(config, M)
    dx, eps2 = config.dx, config.eps**2
    p_next = config.grid.check(p_next, "p")
    q_next = config.grid.check(q_next, "q")
    lam_rho, lam_j, X, Y, ubar = reverse_step(stepper, dx * p_next, dx * eps2 * q_next)
    record = AdjointStageRecord(P=X / dx, Q=Y / dx, control_sensitivity=ubar)
    return lam_rho / dx, lam_j / (dx * eps2), record


def _limit_operators(config):
    pair = config.scheme
    info = classify(pair)
    if not (info.isa and info.type_a):
        raise SolverError(
            f"{pair.name}: the eps = 0 adjoint forms need an implicitly stiffly accurate type A scheme"
        )
    if config.eps != 0.0:
        raise SolverError("the eps = 0 adjoint forms need eps = 0")
    stepper = get_stepper(config)
    ops = stepper.ops
    lap_t = ops.laplace.on_rho.T.tocsr()
    grad_t = ops.grad_rho.on_rho.T.tocsr()  # G^T
    djj_t = ops.grad_j.on_j.T.tocsr()  # D_J^T
    expl_t = (ops.grad_j.on_rho + ops.laplace.on_rho).T.tocsr()  # (D_R + L)^T
    return stepper, lap_t, grad_t, djj_t, expl_t


def adjoint_step_limit(p_next, config):
    """Backward step at ``eps = 0`` keeping the algebraic flux multipliers ``Q``.

    Uses the stiffly accurate rewrite of the density update
    ``rho^{n+1} = R_s - dt (bt - e_s^T At) (D J + D2 R)``, so that
    ``p^n = sum_l P_l`` and ``P_s`` carries ``p^{n+1}``. The ``Q`` stages follow
    from ``A^T Q`` by back-substitution. Returns ``(p_n, AdjointStageRecord)``.
    """
    stepper, lap_t, grad_t, djj_t, expl_t = _limit_operators(config)
    p_next = config.grid.check(p_next, "p")
    s, dt, A, At = stepper.s, stepper.dt, stepper.A, stepper.At
    d_tilde = stepper.bt - At[s - 1]
    m = len(p_next)
    P = np.zeros((s, m))
    Q = np.zeros((s, m))
    djj_p = djj_t @ p_next
    expl_p = expl_t @ p_next
    for k in reversed(range(s)):
        at_p = At[k + 1:, k] @ P[k + 1:]
        a_p = A[k + 1:, k] @ P[k + 1:]
        aq = -(djj_t @ at_p) - d_tilde[k] * djj_p  # (A^T Q)_k
        Q[k] = (aq - A[k + 1:, k] @ Q[k + 1:]) / A[k, k]
        rhs = -dt * (grad_t @ aq) - dt * (expl_t @ at_p) + dt * (lap_t @ a_p) - dt * d_tilde[k] * expl_p
        if k == s - 1:
            rhs = rhs + p_next
        P[k] = stepper.density_systems[k].solve_transposed(rhs)
    return P.sum(axis=0), AdjointStageRecord(P=P, Q=Q)


def adjoint_step_limit_transformed(p_next, config):
    """Backward step at ``eps = 0`` in the variable ``Qbar = dt A^T Q``.

    Standard arrangement ``p^n = p^{n+1} + sum_l P_l``; returns
    ``(p_n, AdjointStageRecord)`` with ``Qbar`` stored in ``record.Q``.
    """
    stepper, lap_t, grad_t, djj_t, expl_t = _limit_operators(config)
    p_next = config.grid.check(p_next, "p")
    s, dt, A, At = stepper.s, stepper.dt, stepper.A, stepper.At
    bt, b = stepper.bt, stepper.b
    m = len(p_next)
    P = np.zeros((s, m))
    Qbar = np.zeros((s, m))
    for k in reversed(range(s)):
        w_expl = At[k + 1:, k] @ P[k + 1:] + bt[k] * p_next
        w_impl = A[k + 1:, k] @ P[k + 1:] + b[k] * p_next
        Qbar[k] = -dt * (djj_t @ w_expl)
        rhs = -(grad_t @ Qbar[k]) - dt * (expl_t @ w_expl) + dt * (lap_t @ w_impl)
        P[k] = stepper.density_systems[k].solve_transposed(rhs)
    return p_next + P.sum(axis=0), AdjointStageRecord(P=P, Q=Qbar)


def solve_adjoint(config, rho_T, rho_d, control=None, record_stages: bool = False) -> AdjointTrajectory:
    """Backward sweep from ``p^N = rho^N - rho_d``, ``q^N = 0``.

    ``control`` (the per-step control of the forward run) is stored so that
    the gradient can detect a stale adjoint.
    """
    grid = config.grid
    p_N, q_N = terminal_condition(grid.check(rho_T, "rho_T"), grid.check(rho_d, "rho_d"))
    N, m = config.n_steps, config.cells
    dx, eps2 = config.dx, config.eps**2
    p = np.empty((N + 1, m))
    q = np.zeros((N + 1, m))
    sens = np.zeros((N, config.scheme.s))
    p[N], q[N] = p_N, q_N
    stages = [None] * N if record_stages else None
    lam_rho = dx * p_N
    lam_j = np.zeros(m)
    if N:
        stepper = get_stepper(config)
    for n in reversed(range(N)):
        try:
            lam_rho, lam_j, X, Y, ubar = reverse_step(stepper, lam_rho, lam_j)
        except Exception as exc:
            raise SolverError(f"adjoint step {n} failed: {exc}") from exc
        p[n] = lam_rho / dx
        if eps2 > 0.0:
            q[n] = lam_j / (dx * eps2)
        sens[n] = ubar
        if record_stages:
            stages[n] = AdjointStageRecord(P=X / dx, Q=Y / dx, control_sensitivity=ubar)
    ctrl = None if control is None else np.array(control, dtype=float)
    return AdjointTrajectory(p=p, q=q, control_sensitivity=sens, config=config, control=ctrl, stages=stages)
