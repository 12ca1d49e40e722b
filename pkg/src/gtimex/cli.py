"""Command-line entry point ``gtimex``.

Every subcommand computes all results first and only then writes files, so a
failing run leaves the output directory untouched.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ProblemConfig, load_config
from .report import config_header, csv_text, summary_text, write_atomic
from .tableau import TableauError, builtin_scheme, check_order2, classify, scheme_from_spec

__all__ = ["main", "build_parser"]

logger = logging.getLogger("gtimex")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtimex", description="AP IMEX solvers for boundary control of a relaxation system")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, schemes="single"):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=1, help="process count for independent rows")
        p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
        if schemes == "single":
            p.add_argument("--scheme", help="registered scheme name (overrides the config)")
        else:
            p.add_argument("--scheme", help="comma-separated scheme names")

    p = sub.add_parser("forward", help="integrate the state for a given control")
    common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--control", help="constant value or 'exact' (manufactured problem)")

    p = sub.add_parser("optimize", help="projected-gradient optimisation of the boundary control")
    common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("order-study", help="temporal convergence study in the heat limit")
    common(p, schemes="list")
    p.add_argument("--steps", type=_int_list, help="comma-separated N values")

    p = sub.add_parser("benchmark", help="tracking benchmark over eps")
    common(p, schemes="list")
    p.add_argument("--eps", type=_float_list, help="comma-separated eps values")
    p.add_argument("--steps", type=int, help="time steps N (default 100)")
    p.add_argument("--cells", type=int, help="cells M (default 50)")

    p = sub.add_parser("ce-verify", help="stage-residual scaling of the optimal relaxation weights")
    common(p, schemes="list")
    p.add_argument("--eps", type=_float_list)

    p = sub.add_parser("check-scheme", help="print classification flags of a scheme")
    p.add_argument("scheme", help="registered name or path to a JSON tableau pair")
    return parser


# ----------------------------------------------------------------- helpers


def _load(args) -> tuple[ProblemConfig, dict]:
    if args.config:
        return load_config(args.config)
    return ProblemConfig(), {}


def _schemes(args, config, experiment):
    spec = args.scheme or experiment.get("schemes")
    if spec is None:
        return [config.scheme]
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    try:
        return [builtin_scheme(n.strip()) for n in names]
    except TableauError as exc:
        raise UsageError(str(exc)) from None


def _single_scheme(args, config):
    if not args.scheme:
        return config
    try:
        return config.with_(scheme=builtin_scheme(args.scheme))
    except TableauError as exc:
        raise UsageError(str(exc)) from None


class Outputs:
    """Collects file contents; nothing touches the disk until :meth:`flush`."""

    def __init__(self, out: str, plots: bool):
        self.out = Path(out)
        self.plots = plots
        self.files: dict[str, str] = {}
        self.figures: list = []

    def csv(self, name, columns, rows, header):
        self.files[name] = csv_text(columns, rows, header)

    def text(self, name, text):
        self.files[name] = text

    def figure(self, fn, *args):
        if self.plots:
            self.figures.append((fn, args))

    def flush(self) -> list[Path]:
        if self.out.exists() and not self.out.is_dir():
            raise UsageError(f"--out {self.out} exists and is not a directory")
        written = [write_atomic(self.out / name, text) for name, text in self.files.items()]
        for fn, args in self.figures:
            try:
                result = fn(*args)
            except Exception as exc:  # figures are a convenience; the CSVs are the record
                logger.warning("figure %s failed: %s", fn.__name__, exc)
                continue
            written += list(result) if isinstance(result, tuple) else [result]
        return written


def _state_rows(traj):
    x = traj.config.grid.centers
    for n, t in enumerate(traj.times):
        for i in range(len(x)):
            yield n, t, x[i], traj.rho[n, i], traj.j[n, i]


def _adjoint_rows(adj):
    cfg = adj.config
    x = cfg.grid.centers
    for n, t in enumerate(cfg.times):
        for i in range(len(x)):
            yield n, t, x[i], adj.p[n, i], adj.q[n, i]


def _control_rows(config, u):
    return [(n, config.times[n], u[n]) for n in range(config.n_steps)]


# ---------------------------------------------------------------- commands


def cmd_forward(args, outputs: Outputs) -> list[str]:
    from .forward import solve_forward
    from .plotting import plot_state

    config, experiment = _load(args)
    config = _single_scheme(args, config)
    if args.eps is not None:
        config = config.with_(eps=args.eps)
    spec = args.control if args.control is not None else experiment.get("control", 0.0)
    if spec == "exact":
        if config.data.exact_control is None:
            raise UsageError(f"problem {config.problem!r} has no exact control")
        control = config.data.exact_control
        u = np.asarray(control(config.times[:-1]), dtype=float)
    else:
        try:
            u = np.full(config.n_steps, float(spec))
        except (TypeError, ValueError):
            raise UsageError(f"control must be a number or 'exact', got {spec!r}") from None
        control = u
    traj = solve_forward(config, control)
    header = config_header(config, {"command": "forward", "control": spec})
    outputs.csv("state.csv", ["n", "t", "x", "rho", "j"], _state_rows(traj), header)
    outputs.csv("control.csv", ["n", "t", "u"], _control_rows(config, u), header)
    target = config.target()
    dev = traj.terminal - target
    body = [
        f"max |rho| over the run: {np.max(np.abs(traj.rho)):.6e}",
        f"terminal misfit (dx-weighted L2): {np.sqrt(config.dx * dev @ dev):.6e}",
    ]
    outputs.text("summary.txt", summary_text("forward", header, body))
    outputs.figure(plot_state, traj, outputs.out / "state.png", target)
    return body


def cmd_optimize(args, outputs: Outputs) -> list[str]:
    from .adjoint import solve_adjoint
    from .control import optimize
    from .forward import solve_forward
    from .plotting import plot_state, plot_trace

    config, experiment = _load(args)
    config = _single_scheme(args, config)
    if args.eps is not None:
        config = config.with_(eps=args.eps)
    max_iter = args.max_iter if args.max_iter is not None else int(experiment.get("max_iter", 10_000))
    u0 = np.full(config.n_steps, float(experiment.get("u0", 0.0)))
    report = optimize(config, u0, max_iter=max_iter)
    traj = solve_forward(config, report.u_star)
    adj = solve_adjoint(config, traj.terminal, config.target(), control=report.u_star)
    header = config_header(config, {"command": "optimize", "max_iter": max_iter})
    outputs.csv("control.csv", ["n", "t", "u"], _control_rows(config, report.u_star), header)
    outputs.csv("state.csv", ["n", "t", "x", "rho", "j"], _state_rows(traj), header)
    outputs.csv("adjoint.csv", ["n", "t", "x", "p", "q"], _adjoint_rows(adj), header)
    outputs.csv("trace.csv", ["iter", "J", "grad_norm", "step_size"], report.trace_rows(), header)
    body = [
        f"J(u*) = {report.j_star:.6e}",
        f"iterations = {report.iterations}",
        f"converged = {report.converged}",
        f"stationarity = {report.final_stationarity:.3e}",
    ]
    outputs.text("summary.txt", summary_text("optimize", header, body))
    outputs.figure(plot_state, traj, outputs.out / "state.png", config.target())
    outputs.figure(plot_trace, report, outputs.out / "trace.png")
    return body


def cmd_order_study(args, outputs: Outputs) -> list[str]:
    from .plotting import plot_order
    from .study import ORDER_STEPS, OrderRow, run_order_study

    config, experiment = _load(args)
    schemes = _schemes(args, config, experiment)
    steps = args.steps or experiment.get("steps") or list(ORDER_STEPS)
    if not steps:
        raise UsageError("the list of step counts is empty")
    results = {s.name: run_order_study(s, steps, workers=args.workers, base=config) for s in schemes}
    header = config_header(None, {"command": "order-study", "eps": 0.0, "steps": list(steps),
                                  "schemes": list(results), "dx": "1/N"})
    cols = ["scheme", "n_steps", *OrderRow.NORMS, "rate_rho_L1", "rate_rho_Linf", "rate_p_L1", "rate_p_Linf", "error"]
    rows = [[name] + [getattr(r, c) for c in cols[1:]] for name, rs in results.items() for r in rs]
    outputs.csv("order.csv", cols, rows, header)
    body = []
    for name, rs in results.items():
        body.append(name)
        body.append("   N   rho L1      rho max     p L1        p max")
        for r in rs:
            rates = "" if np.isnan(r.rate_rho_L1) else f"  rates {r.rate_rho_L1:.2f} {r.rate_rho_Linf:.2f} {r.rate_p_L1:.2f} {r.rate_p_Linf:.2f}"
            body.append(f"{r.n_steps:4d}   {r.err_rho_L1:.3e}   {r.err_rho_Linf:.3e}   {r.err_p_L1:.3e}   {r.err_p_Linf:.3e}{rates}{'  ' + r.error if r.error else ''}")
        body.append("")
    outputs.text("summary.txt", summary_text("order study", header, body))
    outputs.figure(plot_order, results, outputs.out / "order.png")
    return body


def cmd_benchmark(args, outputs: Outputs) -> list[str]:
    from .plotting import plot_benchmark
    from .study import BENCHMARK_EPS, run_benchmark

    config, experiment = _load(args)
    schemes = _schemes(args, config, experiment)
    eps_list = args.eps or experiment.get("eps") or list(BENCHMARK_EPS)
    n_steps = args.steps or int(experiment.get("n_steps", 100))
    cells = args.cells or int(experiment.get("cells", 50))
    rows = run_benchmark(schemes, eps_list, workers=args.workers, base=config, n_steps=n_steps, cells=cells)
    header = config_header(None, {"command": "benchmark", "t_final": 1.58, "nu": 1e-3, "bounds": [-1, 1],
                                  "n_steps": n_steps, "cells": cells, "eps": list(eps_list),
                                  "schemes": [s.name for s in schemes], "problem": "tracking"})
    cols = ["scheme", "eps", "phi", "j_star", "iterations", "converged", "stable", "max_abs_rho", "stationarity", "status"]
    outputs.csv("benchmark.csv", cols, [[r.summary()[c] for c in cols] for r in rows], header)
    ctrl, state = [], []
    for r in rows:
        if r.control is None:
            continue
        cfg = r.config
        ctrl += [(r.scheme, r.eps, n, cfg.times[n], r.control[n]) for n in range(cfg.n_steps)]
        target = cfg.target()
        x = cfg.grid.centers
        state += [(r.scheme, r.eps, x[i], r.deviation[i] + target[i], target[i], r.deviation[i]) for i in range(len(x))]
    outputs.csv("control.csv", ["scheme", "eps", "n", "t", "u"], ctrl, header)
    outputs.csv("state.csv", ["scheme", "eps", "x", "rho_T", "rho_d", "deviation"], state, header)
    body = [f"{'scheme':8s} {'eps':>5s} {'J(u*)':>12s} {'iter':>6s}  status"]
    for r in rows:
        j = "-" if np.isnan(r.j_star) else f"{r.j_star:.4e}"
        body.append(f"{r.scheme:8s} {r.eps:5.2f} {j:>12s} {r.iterations:6d}  {r.status}")
    outputs.text("summary.txt", summary_text("benchmark", header, body))
    outputs.figure(plot_benchmark, rows, outputs.out / "benchmark_control.png", outputs.out / "benchmark_deviation.png")
    return body


def cmd_ce_verify(args, outputs: Outputs) -> list[str]:
    from .study import run_ce_verify

    config, experiment = _load(args)
    schemes = _schemes(args, config, experiment)
    eps_list = args.eps or experiment.get("eps")
    results = {s.name: run_ce_verify(s, eps_list, base=config) for s in schemes}
    header = config_header(None, {"command": "ce-verify", "dt": 1.0, "cells": config.cells,
                                  "schemes": list(results)})
    rows = [(name, r.eps, r.residual, r.rate) for name, rs in results.items() for r in rs]
    outputs.csv("ce.csv", ["scheme", "eps", "residual", "rate"], rows, header)
    body = [f"{n:8s} eps={e:.4e} residual={res:.4e} rate={rate:.3f}" for n, e, res, rate in rows]
    outputs.text("summary.txt", summary_text("relaxation residuals", header, body))
    return body


def cmd_check_scheme(args) -> list[str]:
    spec = args.scheme
    if Path(spec).is_file():
        try:
            spec = json.loads(Path(spec).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.scheme}: invalid JSON ({exc.msg})") from None
    pair = scheme_from_spec(spec)
    flags = classify(pair)
    order2 = check_order2(pair)
    return [
        f"scheme: {pair.name}",
        f"stages: {pair.s}",
        f"type A: {flags.type_a}",
        f"ISA: {flags.isa}",
        f"GSA: {flags.gsa}",
        f"order 2: {order2}",
    ]


COMMANDS = {
    "forward": cmd_forward,
    "optimize": cmd_optimize,
    "order-study": cmd_order_study,
    "benchmark": cmd_benchmark,
    "ce-verify": cmd_ce_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "check-scheme":
            lines = cmd_check_scheme(args)
        else:
            if args.workers < 1:
                raise UsageError("--workers must be at least 1")
            outputs = Outputs(args.out, plots=not args.no_plots)
            lines = COMMANDS[args.command](args, outputs)
            written = outputs.flush()
            lines = list(lines) + [f"wrote {p}" for p in written]
    except (ConfigError, UsageError, TableauError) as exc:
        parser.print_usage(sys.stderr)
        print(f"gtimex: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failures: report, exit nonzero
        print(f"gtimex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
