"""Resolving power of the single-mode reconstruction.

Mode ``p`` is resolvable when ``1/SNR`` is below the diagonal weight
``sum_j |F_{j,q-j}|^2`` with ``q = p + z``.  The Neumann addition theorem
``sum_j J_j J_{q-j} e^{ij psi} = e^{iq psi/2} J_q(2x cos(psi/2))`` turns
that sum into ``(2/pi) int_0^{pi/2} |f_p|^2``, which is what the
asymptotic thresholds expand.

Radii are in mm throughout; the table helpers convert to micrometres.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from . import specfun
from .inversion import f_weight_ctx, mode_weight_coefficients
from .model import ImagingContext

R_MIN, R_MAX = 1e-6, 1.0
MAX_QUAD_NODES = 2 ** 12


class QuadratureError(ArithmeticError):
    """Gauss-Legendre doubling did not reach the tolerance."""


class NoRootError(ValueError):
    """``1/SNR`` lies outside the range of the threshold on the radius bracket."""


class Regime(enum.Enum):
    LargeKR = "LargeKR"
    SmallKR = "SmallKR"
    Exact = "Exact"


@dataclass(frozen=True)
class RegimeThreshold:
    """Right-hand side of the resolving condition in a given regime.

    ``exponentially_small`` marks the large-``|k|R`` case ``p + z > 2|k|R``
    where no finite threshold is returned (``value`` is then 0).
    """

    regime: Regime
    value: float
    exponentially_small: bool = False

    def resolves(self, snr):
        return (not self.exponentially_small) and 1.0 / snr < self.value


def curve_z(p):
    """Applied mode used for mode ``p`` in the radius/mode-count curves: ``z = delta_0(p) - p``."""
    return 1 if p == 0 else -p


def _coeffs(p, z, ctx):
    q = p + z
    a, b = mode_weight_coefficients(z, q, ctx)
    return q, complex(a), complex(b)


def f_p_eval(p, theta, z, R, beta, k, params, omega, convention="derived"):
    """``f_p(theta) = a y J'_q(y) + (a + R b) J_q(y)``, ``y = 2ikR sin theta``, ``q = p + z``."""
    from .model import MembraneModel

    ctx = ImagingContext(params=params, membrane=MembraneModel(beta), R=R, omega=omega,
                         convention=convention)
    if not np.isclose(ctx.k, k, rtol=1e-12, atol=0):
        raise ValueError("k is inconsistent with params and omega")
    return f_p_ctx(p, theta, z, ctx)


def f_p_ctx(p, theta, z, ctx: ImagingContext):
    return sum(_f_p_terms(p, theta, z, ctx))


def _f_p_terms(p, theta, z, ctx):
    q, a, b = _coeffs(p, z, ctx)
    y = 2j * ctx.k * ctx.R * np.sin(np.asarray(theta, float))
    return a * y * specfun.bessel_j_derivative(q, y), (a + ctx.R * b) * specfun.bessel_j(q, y)


@functools.lru_cache(maxsize=None)
def _gauss(n):
    return roots_legendre(n)


def resolving_integral(p, z, ctx: ImagingContext, rtol=1e-12):
    """``(2/pi) int_0^{pi/2} |f_p|^2`` by Gauss-Legendre with node doubling.

    The tolerance is relative to the integral of the squared uncancelled
    terms, so modes whose two terms nearly cancel still terminate.
    """
    n = 16
    prev = None
    while n <= MAX_QUAD_NODES:
        x, w = _gauss(n)
        theta = 0.25 * np.pi * (x + 1.0)
        t1, t2 = _f_p_terms(p, theta, z, ctx)
        cur = float(0.5 * np.sum(w * np.abs(t1 + t2) ** 2))  # (2/pi) * (pi/4) sum
        scale = max(cur, float(0.5 * np.sum(w * (np.abs(t1) + np.abs(t2)) ** 2)))
        if prev is not None and abs(cur - prev) <= rtol * scale:
            return cur
        prev = cur
        n *= 2
    raise QuadratureError(f"resolving integral for p={p}, z={z} did not converge")


def resolving_series(p, z, ctx: ImagingContext, J_trunc=200):
    """``sum_{|j| <= J} |F_{j, p+z-j}|^2`` summed directly."""
    q = p + z
    j = np.arange(-J_trunc, J_trunc + 1)
    return float(np.sum(np.abs(f_weight_ctx(j, q - j, z, ctx)) ** 2))


def resolving_condition(p, snr, ctx: ImagingContext, z=None):
    """Strict ``1/SNR < (2/pi) int |f_p|^2``."""
    if not snr > 0:
        raise ValueError("snr must be positive")
    z = curve_z(p) if z is None else z
    return 1.0 / snr < resolving_integral(p, z, ctx)


def small_kr_threshold(p, z, ctx: ImagingContext):
    """Leading small-``|k|R`` term of the resolving integral.

    With ``q = p + z >= 0`` (reflect first) the expansion of ``f_p`` in
    powers of ``y/2`` has coefficients
    ``c_s = (-1)^s (a (q + 2s) + a + R b) / (s! (q + s)!)``; the first
    non-vanishing one gives
    ``|c_s|^2 (|k|R)^{2n} (2n)! / (4^n (n!)^2)`` with ``n = q + 2s``.
    For ``s = 0`` this is ``(|k|R/2)^{2q} (2q)! / (q!)^4 |a(q+1) + R b|^2``.
    """
    q, a, b = _coeffs(p, z, ctx)
    q = abs(q)
    R = ctx.R
    kr = abs(ctx.k) * R
    scale = abs(a) * (q + 3) + abs(R * b)
    for s in range(0, 4):
        c = (a * (q + 2 * s) + a + R * b) / (math.factorial(s) * math.factorial(q + s))
        if abs(c) * math.factorial(q + s) * math.factorial(s) > 1e-10 * scale:
            n = q + 2 * s
            return abs(c) ** 2 * kr ** (2 * n) * math.factorial(2 * n) / (4 ** n * math.factorial(n) ** 2)
    return 0.0


def large_kr_constant(R, z, ctx: ImagingContext, p=0):
    """``C(R, z) = (4|a|^2/pi^2) R sum_n (4 Re(k) R)^{2n}/(2n)! 2^{2n}(n!)^2/(2n+1)!``."""
    c = ctx.with_radius(R)
    _, a, _ = _coeffs(p, z, c)
    x = 4 * ctx.k.real * R
    total, n = 0.0, 0
    while True:
        # term_n = x^{2n} 4^n (n!)^2 / ((2n)! (2n+1)!), in logs to avoid overflow
        log_t = (2 * n * math.log(x) if x > 0 else (0.0 if n == 0 else -math.inf)) + n * math.log(4) \
            + 2 * math.lgamma(n + 1) - math.lgamma(2 * n + 1) - math.lgamma(2 * n + 2)
        t = math.exp(log_t) if log_t > -745 else 0.0
        total += t
        if t < 1e-16 * total or n > 10000:
            break
        n += 1
    return 4 * abs(a) ** 2 / math.pi ** 2 * R * total


def asymptotic_threshold(regime, p, z, R, ctx: ImagingContext) -> RegimeThreshold:
    """Threshold for ``1/SNR`` in the requested regime at radius ``R``."""
    regime = Regime(regime) if not isinstance(regime, Regime) else regime
    c = ctx.with_radius(R)
    kr = abs(c.k) * R
    if regime is Regime.SmallKR:
        if kr > 0.1:
            warnings.warn(f"|k|R = {kr:.3g} is not small", RuntimeWarning, stacklevel=2)
        return RegimeThreshold(regime, small_kr_threshold(p, z, c))
    if regime is Regime.LargeKR:
        if kr < 10:
            warnings.warn(f"|k|R = {kr:.3g} is not large", RuntimeWarning, stacklevel=2)
        if abs(p + z) >= 2 * kr:
            return RegimeThreshold(regime, 0.0, exponentially_small=True)
        return RegimeThreshold(regime, large_kr_constant(R, z, c, p) * abs(c.k))
    return RegimeThreshold(regime, resolving_integral(p, z, c))


def F_p(p, R, ctx: ImagingContext, z=None):
    """Small-``|k|R`` threshold as a function of the radius."""
    z = curve_z(p) if z is None else z
    return small_kr_threshold(p, z, ctx.with_radius(R))


def min_radius(snr, p, z, ctx: ImagingContext, rtol=1e-8):
    """Smallest radius with ``F_p(R) >= 1/SNR`` (bisection in ``log R``)."""
    if not snr > 0:
        raise ValueError("snr must be positive")
    target = 1.0 / snr
    lo, hi = R_MIN, R_MAX * (1 - 1e-9)
    grid = np.geomspace(lo, hi, 64)
    vals = np.array([F_p(p, r, ctx, z) for r in grid])
    if not np.all(np.diff(vals) > 0):
        raise ArithmeticError(f"F_{p} is not increasing on the radius bracket")
    if target < vals[0] or target > vals[-1]:
        raise NoRootError(f"1/SNR = {target:.3g} outside [{vals[0]:.3g}, {vals[-1]:.3g}] for p = {p}")
    i = int(np.searchsorted(vals, target))
    a, b = (grid[i - 1], grid[i]) if i > 0 else (grid[0], grid[0])
    if a == b:
        return float(a)
    la, lb = math.log(a), math.log(b)
    while lb - la > rtol:
        mid = 0.5 * (la + lb)
        if F_p(p, math.exp(mid), ctx, z) < target:
            la = mid
        else:
            lb = mid
    return math.exp(0.5 * (la + lb))


P_SEARCH_CAP = 64


def max_mode_number(R, snr, ctx: ImagingContext):
    """Consecutively resolvable modes ``1..p'`` plus one if mode 0 resolves."""
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    if not snr > 0:
        raise ValueError("snr must be positive")
    target = 1.0 / snr
    count = 0
    for q in range(1, P_SEARCH_CAP + 1):
        if F_p(q, R, ctx) > target:
            count = q
        else:
            break
    return count + (1 if F_p(0, R, ctx) > target else 0)


def rstar_table(snrs, ctx: ImagingContext, modes=(0, 1, 2, 3)):
    """Rows ``(snr, R*_p0, ...)`` in micrometres; ``nan`` where no root exists."""
    rows = []
    for s in snrs:
        row = [float(s)]
        for p in modes:
            try:
                row.append(min_radius(s, p, curve_z(p), ctx) * 1e3)
            except NoRootError:
                row.append(float("nan"))
        rows.append(row)
    return rows


def maxmode_table(radii_mm, snrs, ctx: ImagingContext):
    """Rows ``(R_um, p(R, snr_1), ...)``."""
    return [[float(R) * 1e3] + [max_mode_number(R, s, ctx) for s in snrs] for R in radii_mm]
