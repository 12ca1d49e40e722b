"""Experiment drivers: temporal order study, control benchmark, relaxation check.

Each driver returns plain row objects; file output lives in :mod:`gtimex.report`.
Rows are independent and may be computed in a process pool.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .config import ProblemConfig
from .control import optimize
from .forward import SolverError, solve_forward

__all__ = [
    "OrderRow",
    "BenchmarkRow",
    "CERow",
    "ORDER_STEPS",
    "BENCHMARK_EPS",
    "order_config",
    "benchmark_config",
    "order_row",
    "run_order_study",
    "add_rates",
    "benchmark_row",
    "run_benchmark",
    "run_ce_verify",
]

logger = logging.getLogger(__name__)

ORDER_STEPS = (20, 40, 80, 160, 320)
BENCHMARK_EPS = (0.0, 0.1, 0.5, 0.8, 1.0)
# a trajectory leaving this ball is reported as unstable
BLOWUP_BOUND = 1e3


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- order study


@dataclass
class OrderRow:
    n_steps: int
    err_rho_L1: float
    err_rho_Linf: float
    err_p_L1: float
    err_p_Linf: float
    rate_rho_L1: float = float("nan")
    rate_rho_Linf: float = float("nan")
    rate_p_L1: float = float("nan")
    rate_p_Linf: float = float("nan")
    error: str = ""

    NORMS = ("err_rho_L1", "err_rho_Linf", "err_p_L1", "err_p_Linf")

    def as_dict(self) -> dict:
        return asdict(self)


def order_config(scheme, n_steps: int, base: ProblemConfig | None = None) -> ProblemConfig:
    """Heat-limit manufactured problem with ``dx = dt`` on ``[0, 1] x [0, 1]``."""
    base = ProblemConfig() if base is None else base
    return base.with_(
        eps=0.0, nu=0.0, t_final=1.0, n_steps=n_steps, cells=n_steps, scheme=scheme, problem="manufactured", phi="auto"
    )


def _time_norms(field_history, dx):
    """``(max_n dx sum |f_n|, max_n max |f_n|)``."""
    absf = np.abs(field_history)
    return float(np.max(dx * absf.sum(axis=1))), float(np.max(absf))


def order_row(config: ProblemConfig) -> OrderRow:
    """Errors of one resolution of the order study.

    The state error is measured against the exact solution at every time
    level; the adjoint is started from ``rho^N - rho_d`` and, since the exact
    multiplier vanishes, its norm is itself the error.
    """
    data = config.data
    try:
        traj = solve_forward(config, data.exact_control)
        x = config.grid.centers
        exact = np.array([data.exact_rho(x, t) for t in config.times])
        e_rho = _time_norms(traj.rho - exact, config.dx)
        adj = solve_adjoint(config, traj.terminal, config.target())
        e_p = _time_norms(adj.p, config.dx)
    except SolverError as exc:
        nan = float("nan")
        return OrderRow(config.n_steps, nan, nan, nan, nan, error=str(exc))
    return OrderRow(config.n_steps, e_rho[0], e_rho[1], e_p[0], e_p[1])


def add_rates(rows: list[OrderRow]) -> list[OrderRow]:
    """``rate_k = log2(err_{k-1} / err_k)``; the first row has no rates."""
    for prev, cur in zip(rows, rows[1:]):
        for name in OrderRow.NORMS:
            a, b = getattr(prev, name), getattr(cur, name)
            rate = math.log2(a / b) if a > 0 and b > 0 else float("nan")
            setattr(cur, "rate" + name[3:], rate)
    return rows


def run_order_study(scheme, steps=ORDER_STEPS, workers: int = 1, base: ProblemConfig | None = None) -> list[OrderRow]:
    configs = [order_config(scheme, int(n), base) for n in steps]
    return add_rates(_map(order_row, configs, workers))


# ------------------------------------------------------------------ benchmark


@dataclass
class BenchmarkRow:
    scheme: str
    eps: float
    phi: float
    j_star: float
    iterations: int
    converged: bool
    stable: bool
    max_abs_rho: float
    stationarity: float
    seconds: float
    status: str
    control: np.ndarray = field(repr=False, default=None)
    deviation: np.ndarray = field(repr=False, default=None)
    trace: list = field(repr=False, default_factory=list)
    config: ProblemConfig = field(repr=False, default=None)

    def summary(self) -> dict:
        keys = ("scheme", "eps", "phi", "j_star", "iterations", "converged", "stable", "max_abs_rho", "stationarity")
        return {k: getattr(self, k) for k in keys} | {"status": self.status}


def benchmark_config(scheme, eps: float, base: ProblemConfig | None = None, n_steps: int = 100, cells: int = 50):
    """Tracking problem on ``T = 1.58`` with ``nu = 1e-3`` and bounds ``[-1, 1]``."""
    base = ProblemConfig() if base is None else base
    return base.with_(
        eps=float(eps),
        nu=1e-3,
        t_final=1.58,
        n_steps=n_steps,
        cells=cells,
        u_lo=-1.0,
        u_hi=1.0,
        scheme=scheme,
        problem="tracking",
        phi="auto",
    )


def _bounded(config, control) -> tuple[bool, float]:
    try:
        traj = solve_forward(config, control)
    except SolverError:
        return False, float("inf")
    peak = float(max(np.max(np.abs(traj.rho)), np.max(np.abs(traj.j))))
    return peak <= BLOWUP_BOUND, peak


def benchmark_row(config: ProblemConfig, max_iter: int | None = None) -> BenchmarkRow:
    """Optimise one ``(scheme, eps)`` case, skipping it if the scheme is unstable there.

    Stability is probed with the admissible control ``u = u_hi`` before the
    optimisation; an unbounded probe marks the case unstable.
    """
    start = time.perf_counter()
    name = config.scheme.name
    probe_ok, peak = _bounded(config, np.full(config.n_steps, config.u_hi))
    nan = float("nan")
    if not probe_ok:
        return BenchmarkRow(name, config.eps, config.phi_value, nan, 0, False, False, peak, nan,
                            time.perf_counter() - start, "unstable", config=config)
    kwargs = {} if max_iter is None else {"max_iter": max_iter}
    report = optimize(config, **kwargs)
    traj = solve_forward(config, report.u_star)
    peak = float(max(np.max(np.abs(traj.rho)), np.max(np.abs(traj.j))))
    stable = bool(np.isfinite(peak) and peak <= BLOWUP_BOUND)
    status = "ok" if report.converged and stable else ("unstable" if not stable else "not converged")
    return BenchmarkRow(
        scheme=name,
        eps=config.eps,
        phi=config.phi_value,
        j_star=report.j_star,
        iterations=report.iterations,
        converged=report.converged,
        stable=stable,
        max_abs_rho=peak,
        stationarity=report.final_stationarity,
        seconds=time.perf_counter() - start,
        status=status,
        control=report.u_star,
        deviation=traj.terminal - config.target(),
        trace=list(report.trace_rows()),
        config=config,
    )


def run_benchmark(schemes, eps_list=BENCHMARK_EPS, workers: int = 1, base=None, n_steps: int = 100,
                  cells: int = 50) -> list[BenchmarkRow]:
    configs = [benchmark_config(s, e, base, n_steps, cells) for s in schemes for e in eps_list]
    return _map(benchmark_row, configs, workers)


# ---------------------------------------------------------- relaxation check


@dataclass
class CERow:
    eps: float
    residual: float
    rate: float = float("nan")


def run_ce_verify(scheme, eps_list=None, base: ProblemConfig | None = None) -> list[CERow]:
    """Stage residuals ``J_l + mu_l D R_l`` after one step of length ``dt = 1``.

    ``eps_list`` defaults to ``0.1 / 2**k`` down to below ``1e-3``. The step
    is started from the manufactured data with its matching boundary datum.
    """
    from .relaxation import verify_chapman_enskog

    if eps_list is None:
        eps_list = [0.1 / 2**k for k in range(8)]
    base = ProblemConfig() if base is None else base
    cfg = base.with_(eps=float(eps_list[0]), t_final=1.0, n_steps=1, problem="manufactured", scheme=scheme)
    u0 = float(cfg.data.exact_control(0.0))
    res = verify_chapman_enskog(scheme, cfg, list(eps_list), control=u0)
    rows = [CERow(float(e), r) for e, r in zip(eps_list, res)]
    for prev, cur in zip(rows, rows[1:]):
        if prev.residual > 0 and cur.residual > 0:
            cur.rate = math.log(prev.residual / cur.residual) / math.log(prev.eps / cur.eps)
    return rows
