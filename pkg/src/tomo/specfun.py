"""Integer-order Bessel and Hankel functions of complex argument.

Everything downstream evaluates these at imaginary-ish arguments ``i k r``
with small modulus, so the wrappers here are thin: they route negative
orders through the reflection identities, reject NaN input, and refuse to
hand back non-finite values.  The numerical kernels themselves are the
AMOS routines exposed by :mod:`scipy.special`.

All functions accept a scalar or an array for ``z`` and return a complex
scalar or a complex array of the same shape.
"""

from __future__ import annotations

import numpy as np
from scipy import special

MAX_ORDER = 512
MAX_SPH_ORDER = 256
MAX_ABS_ARG = 1.0e3


class BesselDomainError(ValueError):
    """Argument outside the supported domain (NaN, singular point, order cap)."""


class BesselOverflowError(ArithmeticError):
    """The evaluation produced a non-finite value."""


def _as_complex(z):
    z = np.asarray(z, dtype=complex)
    if np.isnan(z).any():
        raise BesselDomainError("NaN argument")
    if np.any(np.abs(z) > MAX_ABS_ARG):
        raise BesselDomainError(f"|z| exceeds {MAX_ABS_ARG:g}")
    return z


def _check_order(order, cap):
    if int(order) != order:
        raise BesselDomainError(f"order must be an integer, got {order!r}")
    order = int(order)
    if abs(order) > cap:
        raise BesselDomainError(f"|order| = {abs(order)} exceeds {cap}")
    return order


def _finish(values, what):
    # jv underflows cleanly to 0 for tiny arguments; only inf/nan is an error
    if not np.all(np.isfinite(values)):
        raise BesselOverflowError(f"{what} overflowed")
    if values.ndim == 0:
        return complex(values)
    return values


def _sign(order):
    return -1.0 if order % 2 else 1.0


def _jv(order, z):
    n = abs(order)
    values = special.jv(n, z)
    return _sign(n) * values if order < 0 else values


def _h1(order, z):
    n = abs(order)
    values = special.hankel1(n, z)
    return _sign(n) * values if order < 0 else values


def bessel_j(order, z):
    """Bessel function of the first kind ``J_order(z)`` for integer order."""
    order = _check_order(order, MAX_ORDER)
    z = _as_complex(z)
    return _finish(np.asarray(_jv(order, z)), f"J_{order}")


def bessel_j_derivative(order, z):
    """``J'_order(z) = (J_{order-1}(z) - J_{order+1}(z)) / 2``."""
    order = _check_order(order, MAX_ORDER)
    z = _as_complex(z)
    return _finish(np.asarray(0.5 * (_jv(order - 1, z) - _jv(order + 1, z))), f"J'_{order}")


def hankel1(order, z):
    """Hankel function of the first kind ``H^(1)_order(z) = J + iY``."""
    order = _check_order(order, MAX_ORDER)
    z = _as_complex(z)
    if np.any(z == 0):
        raise BesselDomainError("H^(1) is singular at z = 0")
    return _finish(np.asarray(_h1(order, z)), f"H1_{order}")


def hankel1_derivative(order, z):
    """``H^(1)'_order(z)`` by the same two-term recurrence as ``J'``."""
    order = _check_order(order, MAX_ORDER)
    z = _as_complex(z)
    if np.any(z == 0):
        raise BesselDomainError("H^(1) is singular at z = 0")
    return _finish(np.asarray(0.5 * (_h1(order - 1, z) - _h1(order + 1, z))), f"H1'_{order}")


def sph_bessel_j(l, z):
    """Spherical Bessel function ``j_l(z)``; ``j_0(0) = 1``."""
    l = _check_order(l, MAX_SPH_ORDER)
    if l < 0:
        raise BesselDomainError("spherical order must be non-negative")
    z = _as_complex(z)
    return _finish(np.asarray(special.spherical_jn(l, z)), f"j_{l}")


def sph_bessel_j_derivative(l, z):
    """Derivative ``j_l'(z)``."""
    l = _check_order(l, MAX_SPH_ORDER)
    if l < 0:
        raise BesselDomainError("spherical order must be non-negative")
    z = _as_complex(z)
    return _finish(np.asarray(special.spherical_jn(l, z, derivative=True)), f"j_{l}'")


def sph_hankel1(l, z):
    """Spherical Hankel function ``h_l^(1)(z) = j_l(z) + i y_l(z)``.

    Built from the closed forms ``h_0 = -i e^{iz}/z`` and
    ``h_1 = -(1 + i/z) e^{iz}/z`` and the upward recurrence
    ``h_{l+1} = (2l+1)/z h_l - h_{l-1}``, which is the stable direction for
    the irregular solution.
    """
    l = _check_order(l, MAX_SPH_ORDER)
    if l < 0:
        raise BesselDomainError("spherical order must be non-negative")
    z = _as_complex(z)
    if np.any(z == 0):
        raise BesselDomainError("h^(1) is singular at z = 0")
    e = np.exp(1j * z) / z
    h_prev = -1j * e
    if l == 0:
        return _finish(np.asarray(h_prev), "h1_0")
    h = -(1.0 + 1j / z) * e
    for n in range(1, l):
        h_prev, h = h, (2 * n + 1) / z * h - h_prev
    return _finish(np.asarray(h), f"h1_{l}")
