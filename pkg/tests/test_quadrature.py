import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from feedbackmz.errors import NumericalError
from feedbackmz.quadrature import integrate


def test_polynomial_is_exact():
    value, err = integrate(lambda t: 3 * t ** 2 + 1, 0.0, 2.0)
    assert abs(value - 10.0) < 1e-13
    assert err < 1e-12


def test_complex_oscillation_matches_scipy():
    f = lambda t: np.exp(-t * t) * np.exp(3j * t)  # noqa: E731
    value, _ = integrate(f, -8, 8, panels=8)
    re, _ = sp_integrate.quad(lambda t: math.exp(-t * t) * math.cos(3 * t), -8, 8, epsabs=1e-14)
    im, _ = sp_integrate.quad(lambda t: math.exp(-t * t) * math.sin(3 * t), -8, 8, epsabs=1e-14)
    assert abs(value - complex(re, im)) < 1e-12


def test_reversed_and_empty_interval():
    v1, _ = integrate(np.cos, 0, 1)
    v2, _ = integrate(np.cos, 1, 0)
    assert v1 == -v2
    assert integrate(np.cos, 2, 2) == (0j, 0.0)


def test_non_convergence_reports_achieved_error():
    with pytest.raises(NumericalError) as info:
        integrate(lambda t: np.sign(t - 0.3) * np.sin(1 / (np.abs(t - 0.3) + 1e-9)), 0, 1, max_panels=50)
    assert info.value.achieved is not None and info.value.achieved > 0
