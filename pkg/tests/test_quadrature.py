import numpy as np
import pytest

from obstreg.errors import QuadratureUnderflow
from obstreg.quadrature import log_integral, probe_tail


@pytest.mark.parametrize("p, upper", [(0.5, 1.0), (1.0, 0.3), (0.125, np.e * 1e-3), (2.0, 5.0)])
def test_power_law_closed_form(p, upper):
    # int_0^X xi^p dxi/xi = X^p / p
    res = log_integral(lambda xi: xi**p, upper)
    assert res.value == pytest.approx(upper**p / p, rel=1e-6)
    assert res.tail <= 0.1 * res.value


def test_zero_integrand_and_zero_upper():
    assert log_integral(lambda xi: 0 * xi, 1.0).value == 0.0
    assert log_integral(lambda xi: xi, 0.0).value == 0.0


def test_slow_power_deepens_window():
    res = log_integral(lambda xi: xi ** (1 / 64), 1.0)
    assert res.value == pytest.approx(64.0, rel=1e-6)
    assert res.lower < 1e-60


def test_non_integrable_raises_when_strict():
    f = lambda xi: 1.0 / np.log(np.e + 1.0 / xi)  # noqa: E731
    with pytest.raises(QuadratureUnderflow):
        log_integral(f, 1.0)
    assert log_integral(f, 1.0, strict=False).tail > 0


@pytest.mark.parametrize("func, diverges", [
    (lambda xi: xi**0.5, False),
    (lambda xi: xi**0.01, False),
    (lambda xi: 1.0 / np.log(np.e + 1.0 / xi), True),
    (lambda xi: 1.0 / np.sqrt(np.log(np.e + 1.0 / xi)), True),
    (lambda xi: 1.0 / np.log(np.e + 1.0 / xi) ** 3, False),
    (lambda xi: 0.0 * xi, False),
    (lambda xi: 1.0 + 0 * xi, True),
])
def test_probe_tail(func, diverges):
    assert probe_tail(func).diverges is diverges
