from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtimex.tableau import (
    ButcherTableau,
    IMEXPair,
    TableauError,
    available_schemes,
    builtin_scheme,
    check_order2,
    classify,
    pair_from_dict,
    parse_coefficient,
    scheme_from_spec,
)

from conftest import euler_pair

# Coefficients typed in independently of the registry.
GSA342_IMPLICIT = [[0.5, 0, 0, 0], [0.75, 0.5, 0, 0], [-0.25, 0, 0.5, 0], [1 / 6, -1 / 6, 0.5, 0.5]]
GSA342_EXPLICIT = [[0, 0, 0, 0], [1.5, 0, 0, 0], [5 / 6, -1 / 3, 0, 0], [1 / 3, 1 / 6, 0.5, 0]]
SSP2332_IMPLICIT = [[0.25, 0, 0], [0, 0.25, 0], [1 / 3, 1 / 3, 1 / 3]]
SSP2332_EXPLICIT = [[0, 0, 0], [0.5, 0, 0], [0.5, 0.5, 0]]


@pytest.mark.parametrize(
    "name, impl, expl, b, bt",
    [
        ("GSA342", GSA342_IMPLICIT, GSA342_EXPLICIT, [1 / 6, -1 / 6, 0.5, 0.5], [1 / 3, 1 / 6, 0.5, 0]),
        ("SSP2332", SSP2332_IMPLICIT, SSP2332_EXPLICIT, [1 / 3] * 3, [1 / 3] * 3),
    ],
)
def test_builtin_coefficients(name, impl, expl, b, bt):
    pair = builtin_scheme(name)
    np.testing.assert_allclose(pair.implicit.A, impl, atol=1e-15)
    np.testing.assert_allclose(pair.explicit.A, expl, atol=1e-15)
    np.testing.assert_allclose(pair.implicit.weights, b, atol=1e-15)
    np.testing.assert_allclose(pair.explicit.weights, bt, atol=1e-15)
    assert pair.implicit.exact and pair.explicit.exact


def test_row_sums_are_nodes(scheme):
    for tab in (scheme.explicit, scheme.implicit):
        np.testing.assert_allclose(np.asarray(tab.A).sum(axis=1), tab.nodes, atol=1e-15)
        assert sum(tab.b) == 1


def test_classification_flags():
    assert classify(builtin_scheme("GSA342")).as_dict() == {"type_a": True, "isa": True, "gsa": True, "order_two": True}
    assert classify(builtin_scheme("SSP2332")).as_dict() == {"type_a": True, "isa": True, "gsa": False, "order_two": True}
    assert classify(euler_pair()).gsa is False  # explicit Euler has c = 0


def test_aliases_and_unknown_name():
    assert builtin_scheme("gsa(3,4,2)").name == "GSA342"
    assert builtin_scheme("ssp2332").name == "SSP2332"
    with pytest.raises(TableauError, match="GSA342, SSP2332"):
        builtin_scheme("RK4")
    assert available_schemes() == ["GSA342", "SSP2332"]


def test_parse_coefficient():
    assert parse_coefficient("1/6") == Fraction(1, 6)
    assert parse_coefficient("-3/4") == Fraction(-3, 4)
    assert parse_coefficient(0.25) == 0.25
    with pytest.raises(TableauError):
        parse_coefficient("one half")


def test_invalid_tableaux():
    with pytest.raises(TableauError):  # upper triangular entry
        ButcherTableau([["1/2", "1/2"], ["0", "1/2"]], ["1/2", "1/2"], ["1", "1/2"])
    with pytest.raises(TableauError):  # weights do not sum to one
        ButcherTableau([["1/2"]], ["1/2"], ["1/2"])
    with pytest.raises(TableauError):  # nodes are not row sums
        ButcherTableau([["1/2"]], ["1"], ["1"])
    with pytest.raises(TableauError):  # explicit with nonzero diagonal
        ButcherTableau([["1"]], ["1"], ["1"], explicit=True)
    with pytest.raises(TableauError):  # stage counts differ
        IMEXPair("bad", builtin_scheme("GSA342").explicit, builtin_scheme("SSP2332").implicit)


def test_pair_from_dict_roundtrip():
    spec = {
        "name": "midpoint",
        "explicit": {"A": [["0", "0"], ["1/2", "0"]], "b": ["0", "1"]},
        "implicit": {"A": [["1/2", "0"], ["0", "1/2"]], "b": ["0", "1"]},
    }
    pair = scheme_from_spec(spec)
    assert pair.name == "midpoint" and pair.s == 2
    assert check_order2(pair)
    flags = classify(pair)
    assert flags.type_a and not flags.isa
    with pytest.raises(TableauError, match="implicit"):
        pair_from_dict({"explicit": spec["explicit"]})


def test_order2_detects_first_order():
    assert not check_order2(euler_pair())
    assert check_order2(builtin_scheme("GSA342"))


@st.composite
def random_pairs(draw):
    s = draw(st.integers(1, 4))
    vals = st.integers(-4, 4).map(lambda k: Fraction(k, 4))
    A = [[draw(vals) if j <= i else Fraction(0) for j in range(s)] for i in range(s)]
    At = [[draw(vals) if j < i else Fraction(0) for j in range(s)] for i in range(s)]
    # stiffly accurate rows with probability one half on each side
    def weights(M):
        if draw(st.booleans()):
            return list(M[-1]) if sum(M[-1]) == 1 else None
        return None
    b = weights(A) or [Fraction(1, s)] * s
    bt = weights(At) or [Fraction(1, s)] * s
    c = [sum(r) for r in A]
    ct = [sum(r) for r in At]
    return IMEXPair("random", ButcherTableau(At, bt, ct, explicit=True), ButcherTableau(A, b, c))


@settings(max_examples=200, deadline=None)
@given(random_pairs())
def test_gsa_implies_isa(pair):
    flags = classify(pair)
    if flags.gsa:
        assert flags.isa
    if flags.isa:
        assert list(pair.implicit.a[-1]) == list(pair.implicit.b)
