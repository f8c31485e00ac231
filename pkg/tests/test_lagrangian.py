import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obstreg.errors import DegenerateBox, NonFinite
from obstreg.lagrangian import CompactBox, Lagrangian, check_ellipticity, estimate_holder, evaluate

UNIT = CompactBox(0, 1, -1, 1, -1, 1)


@pytest.mark.parametrize("src, point, want", [
    ("v^2", (0, 0, 3), 9.0),
    ("v^2 + u^2", (0.5, 2, 1), 5.0),
    ("(1 + v^2)^(1/2)", (0, 0, 0), 1.0),
])
def test_evaluate(src, point, want):
    assert evaluate(Lagrangian.from_expression(src, 1), *point) == want


def test_evaluate_rejects_nonfinite():
    L = Lagrangian.from_expression("1/v", 1)
    with pytest.raises(NonFinite):
        evaluate(L, 0.0, 0.0, 0.0)


def test_degenerate_box():
    with pytest.raises(DegenerateBox):
        CompactBox(0, 0, -1, 1, -1, 1)


def _brute_ratio(L, box, alpha, m=9):
    g = np.stack(np.meshgrid(*[np.linspace(lo, hi, m) for lo, hi in zip(box.lo, box.hi)]), -1).reshape(-1, 3)
    vals = L.eval(*g.T)
    i, j = np.triu_indices(len(g), 1)
    d = np.abs(g[i] - g[j]).sum(1)
    return float(np.max(np.abs(vals[i] - vals[j]) / d**alpha))


def test_holder_quadratic():
    L = Lagrangian.from_expression("v^2", 2)
    est = estimate_holder(L, UNIT)
    assert est.alpha == 1
    # tensor-grid brute force approaches the Lipschitz constant 2 from below
    brute = _brute_ratio(L, UNIT, 1.0, m=17)
    assert brute == pytest.approx(2.0 - 2.0 / 16)
    assert brute <= est.C <= 2.2 + 1e-12


def test_holder_constant():
    est = estimate_holder(Lagrangian.from_expression("3", 1), UNIT)
    assert (est.alpha, est.C) == (1, 0)


def test_holder_square_root_kink():
    L = Lagrangian.from_expression("abs(v)^(1/2)", 1)
    est = estimate_holder(L, UNIT)
    assert est.alpha == 0.5
    assert est.C <= 1.1 * 1.0 + 1e-12
    assert est.C >= _brute_ratio(L, UNIT, 0.5)


@pytest.mark.parametrize("src", ["v^2 + u^2", "sqrt(1 + v^2) + x*u", "abs(v)^(1/2)", "sin(3*v)*u"])
def test_holder_certificate_holds_on_samples(src):
    L = Lagrangian.from_expression(src, 1)
    est = estimate_holder(L, UNIT, seed=4)
    p = est.points
    vals = L.eval(*p.T)
    i, j = np.triu_indices(len(p), 1)
    d = np.abs(p[i] - p[j]).sum(1)
    assert np.all(np.abs(vals[i] - vals[j]) <= est.C * d**est.alpha * (1 + 1e-12))


def test_holder_monotone_on_nested_boxes():
    L = Lagrangian.from_expression("v^4 + abs(u)^(1/2)", 1)
    small = estimate_holder(L, CompactBox(0, 1, -0.5, 0.5, -1, 1), seed=1)
    big = estimate_holder(L, CompactBox(0, 1, -1, 1, -2, 2), seed=1)
    assert big.alpha <= small.alpha
    assert big.C >= small.C


@pytest.mark.parametrize("src, mu, box, passes, observed", [
    ("v^2", 2, UNIT, True, 2.0),
    ("v^2 + u^2", 2, UNIT, True, 2.0),
    ("v^4", 0.1, UNIT, False, 0.0),
])
def test_ellipticity(src, mu, box, passes, observed):
    ok, lo = check_ellipticity(Lagrangian.from_expression(src, mu), box)
    assert ok is passes
    assert lo == pytest.approx(observed, abs=1e-12)


def test_symbolic_derivative_consistency():
    L = Lagrangian.from_expression("v^2 + u^2", 2)
    rng = np.random.default_rng(0)
    x, u, v = rng.uniform(-2, 2, (3, 1000))
    h = 1e-4
    fd = (L.eval(x, u, v + h) - L.eval(x, u, v - h)) / (2 * h)
    assert np.max(np.abs(L.eval_v(x, u, v) - fd)) <= 1e-6


def test_callable_falls_back_to_differences():
    with pytest.warns(UserWarning, match="central differences"):
        L = Lagrangian.from_callable(lambda x, u, v: v**2 + np.sin(u) * v, 2)
    assert L.finite_difference
    v = np.linspace(-2, 2, 11)
    np.testing.assert_allclose(L.eval_v(0.0, 0.3, v), 2 * v + np.sin(0.3), atol=1e-6)
    np.testing.assert_allclose(L.eval_vv(0.0, 0.3, v), 2.0, atol=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_scaled_quadratic_derivatives(c, u, v):
    L = Lagrangian.from_expression(f"{c}*v^2 + u*v", 2 * c)
    assert L.eval_v(0.0, u, v) == pytest.approx(2 * c * v + u)
    assert L.eval_vv(0.0, u, v) == pytest.approx(2 * c)
