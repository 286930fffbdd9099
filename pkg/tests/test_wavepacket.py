import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedbackmz.errors import ParameterError
from feedbackmz.wavepacket import WavepacketParams, gaussian_envelope, norm_squared, overlap, zeta

import oracles

finite = st.floats(-5, 5, allow_nan=False)
widths = st.floats(0.2, 3.0)
params = st.builds(WavepacketParams, center_time=finite, width=widths,
                   carrier_freq=st.floats(-6, 6), phase_offset=st.floats(-math.pi, math.pi))


def test_peak_value():
    assert gaussian_envelope(WavepacketParams(), 0.0) == pytest.approx(math.pi ** -0.25, abs=1e-15)


def test_envelope_symmetric_about_centre():
    p = WavepacketParams(center_time=2.0)
    for x in (0.1, 0.7, 3.3):
        # equal up to the rounding of 2 +/- x
        assert gaussian_envelope(p, 2 + x) == pytest.approx(gaussian_envelope(p, 2 - x), rel=1e-14)


def test_envelope_vectorised_and_positive():
    t = np.linspace(-5, 5, 11)
    env = gaussian_envelope(WavepacketParams(), t)
    assert env.shape == t.shape and np.all(env > 0)


@pytest.mark.parametrize("width", [0.0, -1.0, float("nan"), float("inf")])
def test_bad_width_rejected(width):
    with pytest.raises(ParameterError):
        WavepacketParams(width=width)


def test_zero_phase_is_real():
    p = WavepacketParams(center_time=0.4, width=1.3)
    for t in (-1.0, 0.0, 2.5):
        z = zeta(p, t)
        assert z.imag == 0.0 and z.real == gaussian_envelope(p, t)


def test_quarter_period_phase():
    p = WavepacketParams(carrier_freq=2 * math.pi)
    assert abs(zeta(p, 0.25) - (-1j) * gaussian_envelope(p, 0.25)) < 1e-15


@settings(max_examples=200, deadline=None)
@given(params, st.floats(-20, 20))
def test_modulus_identity(p, t):
    env = gaussian_envelope(p, t)
    assert abs(abs(zeta(p, t)) - env) <= 1e-15 * max(env, 1e-300) + 1e-300


@settings(max_examples=200, deadline=None)
@given(params, st.floats(-20, 20))
def test_zeta_matches_oracle(p, t):
    ref = oracles.mode(t, p.center_time, p.width, p.carrier_freq, p.phase_offset)
    # tails magnify the rounding of (t - centre)^2
    assert abs(zeta(p, t) - ref) <= 1e-12 * (abs(ref) + 1e-300)


@settings(max_examples=30, deadline=None)
@given(params)
def test_normalisation(p):
    assert abs(norm_squared(p) - 1) < 1e-12


def test_self_overlap_is_one():
    p = WavepacketParams(width=0.7, carrier_freq=3.0, phase_offset=0.4)
    assert abs(overlap(p, p, 0.0) - 1) < 1e-12


def test_disjoint_overlap_vanishes():
    p = WavepacketParams()
    assert abs(overlap(p, p, 100.0)) < 1e-12


@pytest.mark.parametrize("delay", [0.5, 1.0, 2.0, -3.0])
def test_overlap_analytic(delay):
    p = WavepacketParams(carrier_freq=1.5)
    # equal carriers: the shift adds a phase exp(i omega delay)
    expected = oracles.gaussian_overlap(delay) * cmath.exp(1j * 1.5 * delay)
    assert abs(overlap(p, p, delay) - expected) < 1e-12


def test_overlap_of_unit_delay_value():
    assert overlap(WavepacketParams(), WavepacketParams(), 1.0).real == pytest.approx(0.7788007830714049, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(params, params, st.floats(-4, 4))
def test_overlap_hermitian_and_bounded(p1, p2, d):
    a = overlap(p1, p2, d)
    b = overlap(p2, p1, -d)
    assert abs(a - b.conjugate()) < 1e-12
    assert abs(a) <= 1 + 1e-12


def test_detuned_overlap_closed_form():
    # equal widths, carriers w1, w2, zero delay: exp(-(w1-w2)^2 sigma^2 / 4)
    p1 = WavepacketParams(carrier_freq=1.0)
    p2 = WavepacketParams(carrier_freq=-1.0)
    assert abs(overlap(p1, p2, 0.0) - math.exp(-1.0)) < 1e-12


def test_replace_validates():
    with pytest.raises(ParameterError):
        WavepacketParams().replace(width=-1)
