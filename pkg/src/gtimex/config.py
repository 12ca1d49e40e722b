"""Problem configuration and the named data sets used by the experiments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import DEFAULT_CLOSURES, Grid1D, phi_policy
from .tableau import IMEXPair, TableauError, builtin_scheme, scheme_from_spec

__all__ = ["ProblemConfig", "ProblemData", "PROBLEMS", "ConfigError", "load_config", "config_from_dict"]


class ConfigError(ValueError):
    def __init__(self, message: str, path: str | None = None, key: str | None = None):
        self.path = path
        self.key = key
        where = []
        if path:
            where.append(f"config {path}")
        if key:
            where.append(f"key {key!r}")
        super().__init__(f"{'; '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class ProblemData:
    """Initial data and target state as functions of ``(x, t_final)``."""

    name: str
    rho0: Callable[[np.ndarray], np.ndarray]
    j0: Callable[[np.ndarray], np.ndarray]
    rho_d: Callable[[np.ndarray, float], np.ndarray]
    exact_rho: Callable[[np.ndarray, float], np.ndarray] | None = None
    exact_control: Callable[[np.ndarray], np.ndarray] | None = None


_ROBIN_DATUM = math.cos(1.0) - math.sin(1.0)

PROBLEMS = {
    # rho = exp(-t) cos(x) solves the heat equation with rho_x(0) = 0 and
    # rho_x(1) + rho(1) = exp(-t) (cos 1 - sin 1).
    "manufactured": ProblemData(
        name="manufactured",
        rho0=np.cos,
        j0=np.zeros_like,
        rho_d=lambda x, T: math.exp(-T) * np.cos(x),
        exact_rho=lambda x, t: math.exp(-t) * np.cos(x),
        exact_control=lambda t: np.exp(-np.asarray(t, dtype=float)) * _ROBIN_DATUM,
    ),
    "tracking": ProblemData(
        name="tracking",
        rho0=np.zeros_like,
        j0=np.zeros_like,
        rho_d=lambda x, T: 0.5 * (1.0 - x**2),
    ),
}


@dataclass(frozen=True)
class ProblemConfig:
    """All scalars of one control problem.

    ``phi`` is ``"auto"`` (tabulated overrides, else ``1 - eps**3``) or a
    number in [0, 1]; ``relaxation`` is ``"optimal"`` or ``"exponential"``.
    """

    eps: float = 0.0
    nu: float = 0.0
    t_final: float = 1.0
    n_steps: int = 20
    cells: int = 20
    u_lo: float = -1.0
    u_hi: float = 1.0
    scheme: IMEXPair = field(default_factory=lambda: builtin_scheme("GSA342"))
    relaxation: str = "optimal"
    phi: str | float = "auto"
    problem: str = "manufactured"
    closures: tuple = DEFAULT_CLOSURES

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError(f"eps must lie in [0, 1], got {self.eps}", key="eps")
        if self.nu < 0:
            raise ConfigError("nu must be nonnegative", key="nu")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive", key="t_final")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ConfigError("n_steps must be a nonnegative integer", key="n_steps")
        if int(self.cells) != self.cells or self.cells < 3:
            raise ConfigError("cells must be an integer >= 3", key="cells")
        if self.u_lo > self.u_hi:
            raise ConfigError(f"inverted bounds [{self.u_lo}, {self.u_hi}]", key="u_lo")
        if self.relaxation not in ("optimal", "exponential"):
            raise ConfigError(f"unknown relaxation policy {self.relaxation!r}", key="relaxation")
        if self.phi != "auto":
            try:
                value = float(self.phi)
            except (TypeError, ValueError):
                raise ConfigError(f"phi must be 'auto' or a number, got {self.phi!r}", key="phi") from None
            if not 0.0 <= value <= 1.0:
                raise ConfigError("phi must lie in [0, 1]", key="phi")
            if self.eps == 0.0 and value != 1.0:
                raise ConfigError("phi must be 1 when eps = 0", key="phi")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}", key="problem")

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)

    @cached_property
    def grid(self) -> Grid1D:
        return Grid1D(self.cells)

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps if self.n_steps else 0.0

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def data(self) -> ProblemData:
        return PROBLEMS[self.problem]

    @cached_property
    def phi_value(self) -> float:
        if self.phi == "auto":
            return phi_policy(self.eps, self.scheme.name)
        return float(self.phi)

    @cached_property
    def operators(self):
        from .operators import SpatialOperators

        return SpatialOperators(self.grid, self.eps, self.phi_value, self.closures)

    @cached_property
    def relaxation_weights(self) -> np.ndarray:
        from .relaxation import mu_exponential, optimal_relaxation

        if self.eps == 0.0:
            return np.ones(self.scheme.s)
        if self.relaxation == "optimal":
            return optimal_relaxation(self.scheme, self.eps, self.dt).mu
        return np.full(self.scheme.s, mu_exponential(self.eps, self.dx))

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.grid.centers
        return np.asarray(self.data.rho0(x), dtype=float), np.asarray(self.data.j0(x), dtype=float)

    def target(self) -> np.ndarray:
        return np.asarray(self.data.rho_d(self.grid.centers, self.t_final), dtype=float)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "closures":
                continue
            value = getattr(self, f.name)
            out[f.name] = value.name if isinstance(value, IMEXPair) else value
        out["dt"] = self.dt
        out["dx"] = self.dx
        out["phi_value"] = self.phi_value
        return out


_SCALAR_KEYS = {
    "eps": float,
    "nu": float,
    "t_final": float,
    "n_steps": int,
    "cells": int,
    "u_lo": float,
    "u_hi": float,
    "relaxation": str,
    "problem": str,
}
KNOWN_KEYS = set(_SCALAR_KEYS) | {"scheme", "phi", "experiment"}


def config_from_dict(data: dict, path: str | None = None) -> ProblemConfig:
    """Build a :class:`ProblemConfig`; ``experiment`` is ignored here."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", path=path)
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise ConfigError("unknown key", path=path, key=sorted(unknown)[0])
    kwargs = {}
    for key, cast in _SCALAR_KEYS.items():
        if key in data:
            try:
                kwargs[key] = cast(data[key])
            except (TypeError, ValueError):
                raise ConfigError(f"cannot interpret {data[key]!r} as {cast.__name__}", path=path, key=key) from None
    if "scheme" in data:
        try:
            kwargs["scheme"] = scheme_from_spec(data["scheme"])
        except TableauError as exc:
            raise ConfigError(str(exc), path=path, key="scheme") from None
    if "phi" in data:
        kwargs["phi"] = data["phi"]
    try:
        return ProblemConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], path=path, key=exc.key) from None


def load_config(path: str | Path) -> tuple[ProblemConfig, dict]:
    """Read a JSON config; returns the problem config and the raw ``experiment`` block."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file ({exc.strerror})", path=str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}", path=str(path)) from None
    config = config_from_dict(data, path=str(path))
    return config, dict(data.get("experiment", {}))
