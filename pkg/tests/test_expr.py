import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from msgas import expr as ex


@pytest.mark.parametrize(
    "text, value",
    [
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("(-2)^2", 4.0),
        ("1 - 2 - 3", -4.0),
        ("8 / 4 / 2", 1.0),
        ("2 * pi", 2 * math.pi),
        ("1e-3 * 4", 4e-3),
        (".5 + 1.", 1.5),
        ("sqrt(16) + log(exp(2)) + tanh(0) + cos(0) + sin(0)", 7.0),
    ],
)
def test_precedence_and_literals(text, value):
    assert ex.evaluate(ex.parse_expr(text), {}) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize(
    "text, col",
    [
        ("1+", 3),
        ("sin(1", 6),
        ("foo(2)", 1),
        ("m1 + y", 6),
        ("2*/3", 3),
        ("1)", 2),
        ("", 1),
        ("3 $ 4", 3),
    ],
)
def test_errors_carry_columns(text, col):
    with pytest.raises(ex.ExprError) as info:
        ex.parse_expr(text, ["m1", "m2"])
    assert info.value.col == col
    assert str(info.value).startswith(f"column {col}:")


def test_allowed_variables_are_enforced():
    ex.parse_expr("x1 + t", ["x1", "t"])
    with pytest.raises(ex.ExprError):
        ex.parse_expr("m1", ["x1"])


def test_vectorised_evaluation():
    e = ex.Expression("sin(2*pi*m1) * m2^2")
    m1 = np.linspace(0, 1, 5)
    out = e(m1=m1, m2=3.0)
    np.testing.assert_allclose(out, np.sin(2 * np.pi * m1) * 9.0)
    assert e.variables == {"m1", "m2"}


def test_unbound_variable():
    with pytest.raises(ex.ExprError):
        ex.Expression("m1 + m2")(m1=1.0)


# random expression trees rendered as text, with Python as the oracle
LEAVES = st.one_of(
    st.sampled_from(["m1", "m2", "pi"]),
    st.floats(0.1, 3.0).map(lambda v: f"{v!r}"),
)


def _combine(children):
    binary = st.tuples(st.sampled_from(["+", "-", "*", "/"]), children, children).map(
        lambda t: f"({t[1]} {t[0]} {t[2]})"
    )
    unary = st.tuples(st.sampled_from(["sin", "cos", "tanh", "exp"]), children).map(lambda t: f"{t[0]}({t[1]})")
    neg = children.map(lambda c: f"(-{c})")
    return st.one_of(binary, unary, neg)


TREES = st.recursive(LEAVES, _combine, max_leaves=12)


def _python(text, env):
    return eval(text, {"sin": math.sin, "cos": math.cos, "tanh": math.tanh, "exp": math.exp, "pi": math.pi}, env)


@settings(max_examples=300, deadline=None)
@given(TREES, st.floats(-1, 1), st.floats(-1, 1))
def test_matches_python_semantics(text, m1, m2):
    env = {"m1": m1, "m2": m2}
    try:
        want = _python(text, env)
    except (ZeroDivisionError, OverflowError):
        assume(False)
    assume(math.isfinite(want) and abs(want) < 1e100)
    with np.errstate(all="ignore"):
        got = ex.Expression(text)(**env)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(TREES, st.floats(-1, 1), st.floats(-1, 1))
def test_derivative_matches_complex_step(text, m1, m2):
    e = ex.Expression(text)
    h = 1e-30
    try:
        with np.errstate(all="ignore"):
            cs = np.imag(e(m1=complex(m1, h), m2=m2)) / h
            d = e.derivative("m1")(m1=m1, m2=m2)
    except (ZeroDivisionError, OverflowError):
        assume(False)
    assume(np.isfinite(cs) and abs(cs) < 1e8)
    assert d == pytest.approx(cs, rel=1e-9, abs=1e-9)


def test_power_and_quotient_derivatives():
    e = ex.Expression("m1^m2 / (1 + m1)")
    m1, m2 = 1.7, 0.6
    h = 1e-30
    for name in ("m1", "m2"):
        env = {"m1": m1, "m2": m2}
        env[name] = complex(env[name], h)
        cs = np.imag(e(**env)) / h
        assert e.derivative(name)(m1=m1, m2=m2) == pytest.approx(cs, rel=1e-13)
