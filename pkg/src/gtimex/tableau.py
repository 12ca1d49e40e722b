"""Butcher tableau pairs for diagonally implicit IMEX Runge-Kutta schemes.

Coefficients of registered schemes are kept as exact ``Fraction`` objects so
that consistency and order conditions can be checked without rounding. The
solvers read the float views (``A``, ``b``, ``c``) which are computed once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Sequence

import numpy as np

__all__ = [
    "ButcherTableau",
    "IMEXPair",
    "SchemeClassification",
    "TableauError",
    "builtin_scheme",
    "available_schemes",
    "classify",
    "check_order2",
    "parse_coefficient",
    "pair_from_dict",
]

CLASSIFY_TOL = 1e-12
ORDER_TOL = 1e-14


class TableauError(ValueError):
    """Raised for malformed tableaux or unknown scheme names."""


def parse_coefficient(value) -> Fraction | float:
    """Parse ``"1/6"``, ``"0.25"``, ints, Fractions or floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TableauError(f"invalid coefficient {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except ValueError:
            pass
        try:
            return float(text)
        except ValueError:
            raise TableauError(f"cannot parse coefficient {value!r}") from None
    if isinstance(value, Number):
        return float(value)
    raise TableauError(f"cannot parse coefficient {value!r}")


def _is_exact(values) -> bool:
    return all(isinstance(v, Fraction) for v in values)


def _close(x, y, tol) -> bool:
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return x == y
    return abs(float(x) - float(y)) <= tol


@dataclass(frozen=True)
class ButcherTableau:
    """One half of an IMEX pair: lower-triangular ``a``, weights ``b``, nodes ``c``.

    ``explicit=True`` additionally requires a zero diagonal.
    """

    a: tuple
    b: tuple
    c: tuple
    explicit: bool = False
    A: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = tuple(tuple(parse_coefficient(v) for v in row) for row in self.a)
        b = tuple(parse_coefficient(v) for v in self.b)
        c = tuple(parse_coefficient(v) for v in self.c)
        s = len(b)
        if s == 0:
            raise TableauError("tableau needs at least one stage")
        if len(a) != s or any(len(row) != s for row in a) or len(c) != s:
            raise TableauError(f"inconsistent tableau shapes for s={s}")
        for i in range(s):
            for j in range(i + 1, s):
                if not _close(a[i][j], 0, CLASSIFY_TOL):
                    raise TableauError(f"a[{i + 1}][{j + 1}] above the diagonal is nonzero")
            if self.explicit and not _close(a[i][i], 0, CLASSIFY_TOL):
                raise TableauError(f"explicit tableau has nonzero diagonal entry a[{i + 1}][{i + 1}]")
            row_sum = sum(a[i][: i + 1], Fraction(0))
            if not _close(row_sum, c[i], CLASSIFY_TOL):
                raise TableauError(f"c[{i + 1}] = {c[i]} differs from row sum {row_sum}")
        if not _close(sum(b, Fraction(0)), 1, CLASSIFY_TOL):
            raise TableauError("weights b do not sum to one")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", np.array([[float(v) for v in row] for row in a]))
        object.__setattr__(self, "weights", np.array([float(v) for v in b]))
        object.__setattr__(self, "nodes", np.array([float(v) for v in c]))
        for arr in (self.A, self.weights, self.nodes):
            arr.flags.writeable = False

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def exact(self) -> bool:
        return _is_exact(self.b) and _is_exact(self.c) and all(_is_exact(r) for r in self.a)

    @property
    def diagonal(self) -> tuple:
        return tuple(self.a[i][i] for i in range(self.s))


@dataclass(frozen=True)
class IMEXPair:
    name: str
    explicit: ButcherTableau
    implicit: ButcherTableau

    def __post_init__(self):
        if self.explicit.s != self.implicit.s:
            raise TableauError(
                f"{self.name}: explicit has {self.explicit.s} stages, implicit {self.implicit.s}"
            )
        if not self.explicit.explicit:
            object.__setattr__(
                self,
                "explicit",
                ButcherTableau(self.explicit.a, self.explicit.b, self.explicit.c, explicit=True),
            )

    @property
    def s(self) -> int:
        return self.implicit.s


@dataclass(frozen=True)
class SchemeClassification:
    type_a: bool
    isa: bool
    gsa: bool
    order_two: bool

    def as_dict(self) -> dict:
        return {"type_a": self.type_a, "isa": self.isa, "gsa": self.gsa, "order_two": self.order_two}


def _stiffly_accurate(tab: ButcherTableau, tol: float) -> bool:
    s = tab.s
    if not _close(tab.c[-1], 1, tol):
        return False
    return all(_close(tab.b[j], tab.a[s - 1][j], tol) for j in range(s))


def classify(pair: IMEXPair, tol: float = CLASSIFY_TOL) -> SchemeClassification:
    type_a = all(not _close(d, 0, tol) for d in pair.implicit.diagonal)
    isa = _stiffly_accurate(pair.implicit, tol)
    gsa = isa and _stiffly_accurate(pair.explicit, tol)
    return SchemeClassification(type_a=type_a, isa=isa, gsa=gsa, order_two=check_order2(pair))


def check_order2(pair: IMEXPair, tol: float = ORDER_TOL) -> bool:
    """Sum of weights is one and ``b . c = 1/2`` on both tableaux."""
    for tab in (pair.explicit, pair.implicit):
        total = sum(tab.b, Fraction(0))
        moment = sum((bi * ci for bi, ci in zip(tab.b, tab.c)), Fraction(0))
        if not (_close(total, 1, tol) and _close(moment, Fraction(1, 2), tol)):
            return False
    return True


def _gsa342() -> IMEXPair:
    explicit = ButcherTableau(
        a=[
            ["0", "0", "0", "0"],
            ["3/2", "0", "0", "0"],
            ["5/6", "-1/3", "0", "0"],
            ["1/3", "1/6", "1/2", "0"],
        ],
        b=["1/3", "1/6", "1/2", "0"],
        c=["0", "3/2", "1/2", "1"],
        explicit=True,
    )
    implicit = ButcherTableau(
        a=[
            ["1/2", "0", "0", "0"],
            ["3/4", "1/2", "0", "0"],
            ["-1/4", "0", "1/2", "0"],
            ["1/6", "-1/6", "1/2", "1/2"],
        ],
        b=["1/6", "-1/6", "1/2", "1/2"],
        c=["1/2", "5/4", "1/4", "1"],
    )
    return IMEXPair("GSA342", explicit, implicit)


def _ssp2332() -> IMEXPair:
    explicit = ButcherTableau(
        a=[["0", "0", "0"], ["1/2", "0", "0"], ["1/2", "1/2", "0"]],
        b=["1/3", "1/3", "1/3"],
        c=["0", "1/2", "1"],
        explicit=True,
    )
    implicit = ButcherTableau(
        a=[["1/4", "0", "0"], ["0", "1/4", "0"], ["1/3", "1/3", "1/3"]],
        b=["1/3", "1/3", "1/3"],
        c=["1/4", "1/4", "1"],
    )
    return IMEXPair("SSP2332", explicit, implicit)


_REGISTRY = {"GSA342": _gsa342, "SSP2332": _ssp2332}
_ALIASES = {"GSA(3,4,2)": "GSA342", "SSP2(3,3,2)": "SSP2332", "SSP(3,3,2)": "SSP2332"}


def available_schemes() -> list[str]:
    return sorted(_REGISTRY)


def builtin_scheme(name: str) -> IMEXPair:
    """Look up a registered scheme; names are case-insensitive."""
    key = name.strip().upper()
    key = _ALIASES.get(key, key)
    try:
        return _REGISTRY[key]()
    except KeyError:
        raise TableauError(
            f"unknown scheme {name!r}; available: {', '.join(available_schemes())}"
        ) from None


def _tableau_from_dict(data: dict, explicit: bool) -> ButcherTableau:
    try:
        a, b = data["A"], data["b"]
    except KeyError as exc:
        raise TableauError(f"tableau is missing key {exc.args[0]!r}") from None
    a = [[parse_coefficient(v) for v in row] for row in a]
    if "c" in data:
        c = data["c"]
    else:
        c = [sum(row[: i + 1], Fraction(0)) if _is_exact(row) else float(sum(map(float, row[: i + 1])))
             for i, row in enumerate(a)]
    return ButcherTableau(a, b, c, explicit=explicit)


def pair_from_dict(data: dict) -> IMEXPair:
    """Build a user-supplied pair from ``{"name", "explicit": {...}, "implicit": {...}}``.

    Each tableau needs ``A`` and ``b``; ``c`` defaults to the row sums.
    Entries may be rationals written as strings (``"1/6"``) or decimals.
    """
    try:
        explicit = _tableau_from_dict(data["explicit"], explicit=True)
        implicit = _tableau_from_dict(data["implicit"], explicit=False)
    except KeyError as exc:
        raise TableauError(f"scheme definition is missing key {exc.args[0]!r}") from None
    return IMEXPair(str(data.get("name", "custom")), explicit, implicit)


def scheme_from_spec(spec: str | dict | IMEXPair) -> IMEXPair:
    if isinstance(spec, IMEXPair):
        return spec
    if isinstance(spec, str):
        return builtin_scheme(spec)
    if isinstance(spec, dict):
        return pair_from_dict(spec)
    raise TableauError(f"cannot build a scheme from {type(spec).__name__}")


def tableau_rows(values: Sequence[Sequence]) -> list[list[str]]:
    return [[str(v) for v in row] for row in values]
