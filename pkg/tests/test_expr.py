import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obstreg.errors import ParseError
from obstreg.expr import Expression


@pytest.mark.parametrize("src, args, want", [
    ("v^2", (0, 0, 3), 9.0),
    ("v^2 + u^2", (0.5, 2, 1), 5.0),
    ("(1 + v^2)^(1/2)", (0, 0, 0), 1.0),
    ("-2^2", (0, 0, 0), -4.0),
    ("2^3^2", (0, 0, 0), 512.0),
    ("min(x, u) + max(x, u)", (1, 2, 0), 3.0),
    ("pow(2, v)", (0, 0, 3), 8.0),
    ("exp(log(3)) + sqrt(16) + abs(-1) + sin(0) + cos(0)", (0, 0, 0), 9.0),
    ("pi - e", (0, 0, 0), math.pi - math.e),
    ("1e-3 * 2.5E2", (0, 0, 0), 0.25),
])
def test_evaluates(src, args, want):
    assert Expression(src)(*args) == pytest.approx(want, rel=1e-15)


def test_vectorised():
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(Expression("x^2", ("x",))(x), x**2)


@pytest.mark.parametrize("src, column", [
    ("v^2 + t", 7),
    ("v +* 2", 4),
    ("sin(v", None),
    ("foo(v)", 1),
    ("min(v)", None),
    ("2 $ 3", 3),
    ("", None),
])
def test_parse_errors(src, column):
    with pytest.raises(ParseError) as info:
        Expression(src)
    if column is not None:
        assert info.value.column == column


def test_obstacle_variables_exclude_u():
    with pytest.raises(ParseError, match="unknown identifier 'u'"):
        Expression("x + u", ("x",))


@pytest.mark.parametrize("src", [
    "v^2 + u^2", "sin(u*v) + exp(x*v)", "sqrt(1 + v^2)", "u^3 * v^2 / (1 + x)",
    "log(2 + v^2) * cos(u)", "pow(1 + v^2, 1.5)", "abs(v)^3",
])
def test_symbolic_derivative_matches_central_difference(src):
    e = Expression(src)
    rng = np.random.default_rng(3)
    x, u, v = rng.uniform(-1, 1, (3, 200))
    for var, idx in (("x", 0), ("u", 1), ("v", 2)):
        d = e.diff(var)
        h = 1e-6
        plus = [x, u, v]
        minus = [x, u, v]
        plus[idx] = plus[idx] + h
        minus[idx] = minus[idx] - h
        fd = (e(*plus) - e(*minus)) / (2 * h)
        np.testing.assert_allclose(d(x, u, v), fd, rtol=1e-5, atol=1e-6)


coeff = st.floats(-5, 5, allow_nan=False).map(lambda c: round(c, 3))


@settings(max_examples=50, deadline=None)
@given(coeff, coeff, coeff, st.floats(-3, 3))
def test_quadratic_derivative_property(a, b, c, v):
    e = Expression(f"({a})*v^2 + ({b})*v + ({c})")
    assert e.diff("v")(0, 0, v) == pytest.approx(2 * a * v + b, abs=1e-9)
    assert e.diff("v").diff("v")(0, 0, v) == pytest.approx(2 * a, abs=1e-12)
