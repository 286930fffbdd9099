"""Adaptive composite Gauss-Legendre quadrature for complex integrands."""

import numpy as np

from .errors import NumericalError

_RULES = {}


def _rule(order):
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def _panel(f, a, b, order):
    x, w = _rule(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * np.dot(w, f(mid + half * x))


def integrate(f, a, b, atol=1e-13, order=20, panels=1, max_panels=20000):
    """Integrate a vectorised (possibly complex) function over [a, b].

    The interval is first cut into ``panels`` equal pieces. A piece is
    accepted when its ``order``-point estimate agrees with the sum over its
    two halves to within its share of ``atol``; otherwise it is bisected.

    Returns ``(value, error_estimate)``. Raises NumericalError when more than
    ``max_panels`` pieces would be needed.
    """
    if b < a:
        value, err = integrate(f, b, a, atol, order, panels, max_panels)
        return -value, err
    if b == a:
        return 0.0 + 0.0j, 0.0
    length = b - a
    edges = np.linspace(a, b, panels + 1)
    stack = [(edges[i], edges[i + 1], _panel(f, edges[i], edges[i + 1], order))
             for i in range(panels)]
    total = 0.0 + 0.0j
    err_total = 0.0
    used = len(stack)
    while stack:
        lo, hi, coarse = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _panel(f, lo, mid, order)
        right = _panel(f, mid, hi, order)
        fine = left + right
        err = abs(fine - coarse)
        if err <= atol * (hi - lo) / length or hi - lo <= 1e-12 * length:
            total += fine
            err_total += err
            continue
        used += 1
        if used > max_panels:
            raise NumericalError(
                f"quadrature did not converge within {max_panels} panels "
                f"(achieved error ~{err_total + err:.3e}, requested {atol:.1e})",
                achieved=err_total + err,
            )
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    return complex(total), err_total
