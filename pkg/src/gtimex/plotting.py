"""Figures rendered next to the CSV output (non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_order", "plot_benchmark", "plot_state", "plot_trace"]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.stem}.tmp{path.suffix}")
    fig.savefig(tmp, bbox_inches="tight")
    plt.close(fig)
    tmp.replace(path)
    return path


def plot_order(results: dict, path) -> Path:
    """Log-log error against ``N`` for each scheme; ``results`` maps scheme -> rows."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0), sharey=True)
        for ax, (field, label) in zip(axes, [("err_rho_L1", "state, L1"), ("err_rho_Linf", "state, max")]):
            for name, rows in results.items():
                n = np.array([r.n_steps for r in rows], dtype=float)
                e = np.array([getattr(r, field) for r in rows])
                ax.loglog(n, e, "o-", label=name)
            if results:
                n0 = n[0]
                e0 = max(getattr(rows[0], field) for rows in results.values())
                ax.loglog(n, e0 * (n0 / n) ** 2, "k--", lw=0.8, label="slope 2")
            ax.set_xlabel("N")
            ax.set_title(label)
            ax.grid(True, which="both", alpha=0.3)
        axes[0].set_ylabel("max-in-time error")
        axes[0].legend()
        return _save(fig, path)


def plot_benchmark(rows, control_path, deviation_path) -> tuple[Path, Path]:
    """Optimal controls and terminal deviations, one curve per ``(scheme, eps)``."""
    shown = [r for r in rows if r.control is not None]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for r in shown:
            t = r.config.times[:-1]
            ax.step(t, r.control, where="post", label=f"{r.scheme}, eps={r.eps:g}")
        ax.set_xlabel("t")
        ax.set_ylabel("u*(t)")
        ax.grid(True, alpha=0.3)
        if shown:
            ax.legend()
        p1 = _save(fig, control_path)

        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for r in shown:
            ax.plot(r.config.grid.centers, r.deviation, label=f"{r.scheme}, eps={r.eps:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("rho(x, T) - rho_d(x)")
        ax.grid(True, alpha=0.3)
        if shown:
            ax.legend()
        p2 = _save(fig, deviation_path)
    return p1, p2


def plot_state(traj, path, target=None) -> Path:
    """Density at a few time levels, with the target if given."""
    cfg = traj.config
    x = cfg.grid.centers
    levels = sorted({0, cfg.n_steps // 2, cfg.n_steps})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for n in levels:
            ax.plot(x, traj.rho[n], label=f"t={cfg.times[n]:.3g}")
        if target is not None:
            ax.plot(x, target, "k--", lw=0.8, label="target")
        ax.set_xlabel("x")
        ax.set_ylabel("rho")
        ax.grid(True, alpha=0.3)
        ax.legend()
        return _save(fig, path)


def plot_trace(report, path) -> Path:
    """Objective and stationarity measure per optimiser iteration."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        it = np.arange(len(report.j_history))
        ax.semilogy(it, report.j_history, label="J")
        ax.semilogy(it, report.grad_norm_history, label="stationarity")
        ax.set_xlabel("iteration")
        ax.grid(True, alpha=0.3)
        ax.legend()
        return _save(fig, path)
