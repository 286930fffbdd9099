"""Single-photon temporal modes: Gaussian envelopes with a linear carrier phase.

A mode is ``zeta(t) = exp(-i (omega t + phi0)) * eps(t)`` where ``eps`` is a
unit-L2 Gaussian. Functions accept scalars or numpy arrays for ``t``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .quadrature import integrate

#: half-width of the integration window, in envelope widths
WINDOW_SIGMAS = 8.0
OVERLAP_ATOL = 1e-13


@dataclass(frozen=True)
class WavepacketParams:
    center_time: float = 0.0
    width: float = 1.0
    carrier_freq: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        for name in ("center_time", "width", "carrier_freq", "phase_offset"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real number, got {value!r}")
        if self.width <= 0:
            raise ParameterError(f"width must be > 0, got {self.width!r}")

    def window(self, shift=0.0):
        """Support window ``center +/- 8 width`` after delaying by ``shift``."""
        c = self.center_time + shift
        return c - WINDOW_SIGMAS * self.width, c + WINDOW_SIGMAS * self.width

    def replace(self, **changes):
        fields = dict(center_time=self.center_time, width=self.width,
                      carrier_freq=self.carrier_freq, phase_offset=self.phase_offset)
        fields.update(changes)
        return WavepacketParams(**fields)


def _check(p):
    if not isinstance(p, WavepacketParams):
        raise ParameterError(f"expected WavepacketParams, got {type(p).__name__}")


def gaussian_envelope(p, t):
    """Unit-norm Gaussian ``(pi w^2)^(-1/4) exp(-(t - t_c)^2 / (2 w^2))``."""
    _check(p)
    t = np.asarray(t, dtype=float)
    x = (t - p.center_time) / p.width
    value = (math.pi * p.width ** 2) ** -0.25 * np.exp(-0.5 * x * x)
    return value if value.ndim else float(value)


def zeta(p, t):
    """Complex mode function; ``abs(zeta(p, t)) == gaussian_envelope(p, t)``."""
    t = np.asarray(t, dtype=float)
    env = gaussian_envelope(p, t)
    value = np.exp(-1j * (p.carrier_freq * t + p.phase_offset)) * env
    return value if np.ndim(value) else complex(value)


def overlap(p1, p2, delay=0.0):
    """``integral conj(zeta_1(t)) * zeta_2(t - delay) dt`` by adaptive quadrature.

    The integration runs over the union of the two +/-8 width windows.
    """
    _check(p1)
    _check(p2)
    lo1, hi1 = p1.window()
    lo2, hi2 = p2.window(delay)
    a, b = min(lo1, lo2), max(hi1, hi2)

    def integrand(t):
        return np.conj(zeta(p1, t)) * zeta(p2, t - delay)

    # initial panels resolve the narrower envelope and the beat carrier
    step = min(p1.width, p2.width)
    beat = abs(p1.carrier_freq - p2.carrier_freq)
    if beat > 0:
        step = min(step, math.pi / beat)
    panels = int(min(max(math.ceil((b - a) / step), 1), 10000))
    value, err = integrate(integrand, a, b, atol=OVERLAP_ATOL, panels=panels)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NumericalError("overlap integral produced a non-finite value", achieved=err)
    return value


def norm_squared(p):
    """``integral |eps(t)|^2 dt`` over the +/-8 width window."""
    lo, hi = p.window()
    value, _ = integrate(lambda t: gaussian_envelope(p, t) ** 2, lo, hi,
                         atol=1e-14, panels=16)
    return value.real
