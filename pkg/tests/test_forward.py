import math

import numpy as np
import pytest

from gtimex.config import ProblemConfig
from gtimex.forward import (
    SolverError,
    imex_step,
    imex_step_limit,
    linear_step_map,
    solve_forward,
    stage_control_table,
    stage_residuals,
)
from gtimex.tableau import ButcherTableau, IMEXPair, builtin_scheme


def dense_step(config, rho, j, u):
    """One step by assembling every stage equation into a single dense system."""
    ops = config.operators
    pair = config.scheme
    s, m = pair.s, config.cells
    A, At = np.array(pair.implicit.A), np.array(pair.explicit.A)
    b, bt = np.array(pair.implicit.weights), np.array(pair.explicit.weights)
    dt, e2, mu = config.dt, config.eps**2, config.relaxation_weights
    L, Lu = ops.laplace.on_rho.toarray(), ops.laplace.on_u
    GJr, GJj, GJu = ops.grad_j.on_rho.toarray(), ops.grad_j.on_j.toarray(), ops.grad_j.on_u
    GRr, GRj, GRu = ops.grad_rho.on_rho.toarray(), ops.grad_rho.on_j.toarray(), ops.grad_rho.on_u
    I = np.eye(m)
    n = 2 * s * m
    K = np.zeros((n, n))
    rhs = np.zeros(n)

    def R(l):
        return slice(l * m, (l + 1) * m)

    def J(l):
        return slice((s + l) * m, (s + l + 1) * m)

    for l in range(s):
        # R_l + dt sum at_lk (GJr R_k + GJj J_k + mu_k L R_k) - dt sum a_lk mu_k L R_k = rho + ...
        K[R(l), R(l)] += I
        rhs[R(l)] = rho
        for k in range(s):
            K[R(l), R(k)] += dt * At[l, k] * (GJr + mu[k] * L) - dt * A[l, k] * mu[k] * L
            K[R(l), J(k)] += dt * At[l, k] * GJj
            rhs[R(l)] += -dt * At[l, k] * (GJu + mu[k] * Lu) * u + dt * A[l, k] * mu[k] * Lu * u
        # eps^2 J_l + dt sum a_lk (GRr R_k + GRj J_k + J_k) = eps^2 j - dt sum a_lk GRu u
        K[J(l), J(l)] += e2 * I
        rhs[J(l)] = e2 * j
        for k in range(s):
            K[J(l), R(k)] += dt * A[l, k] * GRr
            K[J(l), J(k)] += dt * A[l, k] * (GRj + I)
            rhs[J(l)] -= dt * A[l, k] * GRu * u
    z = np.linalg.solve(K, rhs)
    Rs = z[: s * m].reshape(s, m)
    Js = z[s * m:].reshape(s, m)
    H = Rs @ L.T + Lu * u
    F = Rs @ GJr.T + Js @ GJj.T + GJu * u + mu[:, None] * H
    G = Rs @ GRr.T + Js @ GRj.T + GRu * u + Js
    rho_next = rho - dt * bt @ F + dt * (b * mu) @ H
    j_next = j - dt / e2 * b @ G
    return rho_next, j_next


@pytest.mark.parametrize("name, eps", [("GSA342", 1.0), ("GSA342", 0.3), ("SSP2332", 0.5)])
def test_step_matches_dense_assembly(name, eps, rng):
    cfg = ProblemConfig(eps=eps, n_steps=5, cells=9, scheme=builtin_scheme(name))
    rho, j = rng.normal(size=9), rng.normal(size=9)
    r1, j1, _ = imex_step(rho, j, 0.3, cfg)
    r2, j2 = dense_step(cfg, rho, j, 0.3)
    np.testing.assert_allclose(r1, r2, atol=1e-12)
    np.testing.assert_allclose(j1, j2, atol=1e-11)


def test_stage_residuals_vanish(scheme, rng):
    for eps in (0.0, 0.1, 1.0):
        cfg = ProblemConfig(eps=eps, n_steps=10, cells=12, scheme=scheme)
        rho, j = rng.normal(size=12), rng.normal(size=12)
        if eps == 0.0:
            r1, rec = imex_step_limit(rho, 0.2, cfg)
            j1 = np.zeros(12)
        else:
            r1, j1, rec = imex_step(rho, j, 0.2, cfg)
        assert stage_residuals(rho, j, cfg, rec, r1, j1) < 1e-12


def test_superposition(scheme, rng):
    cfg = ProblemConfig(eps=0.5, n_steps=10, cells=10, scheme=scheme)
    x1, x2 = rng.normal(size=(2, 10)), rng.normal(size=(2, 10))
    a, b = 0.7, -1.3
    combo = imex_step(a * x1[0] + b * x2[0], a * x1[1] + b * x2[1], a * 0.4 + b * 0.9, cfg)
    one = imex_step(x1[0], x1[1], 0.4, cfg)
    two = imex_step(x2[0], x2[1], 0.9, cfg)
    np.testing.assert_allclose(combo[0], a * one[0] + b * two[0], atol=1e-12)
    np.testing.assert_allclose(combo[1], a * one[1] + b * two[1], atol=1e-12)


def test_step_map_reproduces_solver(scheme, rng):
    cfg = ProblemConfig(eps=0.5, n_steps=6, cells=8, scheme=scheme)
    S, g = linear_step_map(cfg)
    u = rng.uniform(-1, 1, 6)
    traj = solve_forward(cfg, u)
    x = np.concatenate(cfg.initial_state())
    for n in range(6):
        x = S @ x + g * u[n]
    np.testing.assert_allclose(x, np.concatenate([traj.rho[-1], traj.j[-1]]), atol=1e-12)


def test_asymptotic_agreement():
    # eps = 1e-6 against the limit scheme on a fixed grid
    base = ProblemConfig(n_steps=20, cells=20, scheme=builtin_scheme("GSA342"))
    ctrl = base.data.exact_control
    r0 = solve_forward(base.with_(eps=0.0), ctrl).terminal
    r1 = solve_forward(base.with_(eps=1e-6), ctrl).terminal
    assert np.max(np.abs(r0 - r1)) <= 1e-4


def test_no_parabolic_cfl():
    cfg = ProblemConfig(eps=0.0, t_final=1.0, n_steps=320, cells=320, scheme=builtin_scheme("GSA342"))
    traj = solve_forward(cfg, cfg.data.exact_control)
    assert np.max(np.abs(traj.rho)) <= 1.0 + 1e-12
    assert cfg.dt / cfg.dx**2 > 100


def test_stage_control_table():
    cfg = ProblemConfig(n_steps=4, t_final=1.0, scheme=builtin_scheme("SSP2332"))
    table = stage_control_table(cfg, lambda t: t)
    np.testing.assert_allclose(table[1], 0.25 + 0.25 * np.array([0.25, 0.25, 1.0]))
    np.testing.assert_array_equal(stage_control_table(cfg, np.arange(4.0))[:, 2], np.arange(4.0))
    with pytest.raises(SolverError):
        stage_control_table(cfg, np.zeros(3))
    with pytest.raises(SolverError):
        stage_control_table(cfg, np.zeros((4, 2)))


def test_entry_points_check_eps(scheme):
    cfg = ProblemConfig(eps=0.0, scheme=scheme)
    with pytest.raises(SolverError):
        imex_step(np.zeros(20), np.zeros(20), 0.0, cfg)
    with pytest.raises(SolverError):
        imex_step_limit(np.zeros(20), 0.0, cfg.with_(eps=0.5))


def test_non_type_a_refuses_small_eps():
    pair = IMEXPair(
        "edirk",
        ButcherTableau([["0", "0"], ["1", "0"]], ["1/2", "1/2"], ["0", "1"], explicit=True),
        ButcherTableau([["0", "0"], ["1/2", "1/2"]], ["1/2", "1/2"], ["0", "1"]),
    )
    cfg = ProblemConfig(eps=1e-8, scheme=pair, relaxation="exponential")
    with pytest.raises(SolverError, match="not type A"):
        solve_forward(cfg, np.zeros(cfg.n_steps))


def test_zero_steps_and_trajectory_shapes():
    cfg = ProblemConfig(n_steps=0)
    traj = solve_forward(cfg, np.zeros(0))
    assert traj.rho.shape == (1, 20)
    cfg = ProblemConfig(n_steps=3, cells=5, eps=0.5)
    traj = solve_forward(cfg, np.zeros(3), record_stages=True)
    assert traj.rho.shape == traj.j.shape == (4, 5)
    assert len(traj.stages) == 3 and traj.stages[0].R.shape == (4, 5)
    np.testing.assert_allclose(traj.times, [0, 1 / 3, 2 / 3, 1])


def test_manufactured_second_order():
    errs = []
    for n in (20, 40):
        cfg = ProblemConfig(eps=0.0, n_steps=n, cells=n)
        traj = solve_forward(cfg, cfg.data.exact_control)
        errs.append(np.max(np.abs(traj.terminal - cfg.target())))
    assert 1.8 < math.log2(errs[0] / errs[1]) < 2.2
