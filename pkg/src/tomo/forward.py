"""Modal Green's functions and the fluorescence forward model on the unit disk.

Source convention: the mode-``n`` boundary source is ``f_n = E_n e^{-in phi}``,
which makes the excitation fluence ``J_n(ikr) e^{-in theta}`` everywhere in
the disk.  The intensity coefficient ``I^n(m)`` pairs source ``n`` with
probe ``m``; the cell has only the boundary value ``r = R`` to contribute.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import specfun
from .model import (ImagingContext, MeasurementMatrix, ModeSpectrum, index_grid,
                    source_gain)


@dataclass(frozen=True)
class FluenceSpectrum:
    """Angular spectrum of a fluence field on the circle ``|x| = radius``."""

    radius: float
    coeffs: ModeSpectrum

    def evaluate(self, theta):
        return self.coeffs.evaluate(theta)


def _gain_array(modes, k, ell):
    ik = 1j * k
    modes = np.asarray(modes, dtype=int)
    out = np.empty(modes.shape, dtype=complex)
    for m in np.unique(modes):
        out[modes == m] = ik * ell * specfun.bessel_j_derivative(int(m), ik) + specfun.bessel_j(int(m), ik)
    if np.any(np.abs(out) < 1e-14):
        warnings.warn("near-zero source gain in the requested band", RuntimeWarning, stacklevel=3)
    return out


def _bessel_array(modes, x):
    modes = np.asarray(modes, dtype=int)
    out = np.empty(modes.shape, dtype=complex)
    for m in np.unique(modes):
        out[modes == m] = specfun.bessel_j(int(m), x)
    return out


def green_coeff_disk(m, r_eval, k, ell):
    """Mode-``m`` coefficient of the Robin Green's function at radius ``r_eval``.

    ``G(m) = J_m(ik r) / (ik J'_m(ik) + J_m(ik)/ell)``, i.e. ``ell J_m(ikr)/E_m``.
    """
    if not 0 <= r_eval < 1:
        raise ValueError("r_eval must lie in [0, 1)")
    ik = 1j * k
    denom = ik * specfun.bessel_j_derivative(m, ik) + specfun.bessel_j(m, ik) / ell
    if abs(denom) * ell < 1e-14:
        warnings.warn(f"near-zero Green denominator at mode {m}", RuntimeWarning, stacklevel=2)
    return specfun.bessel_j(m, ik * r_eval) / denom


def excitation_fluence_disk(g_hat: ModeSpectrum, r_eval, k, ell) -> FluenceSpectrum:
    """Fluence on ``|x| = r_eval`` produced by Robin data ``g`` on the unit circle."""
    if not 0 <= r_eval <= 1:
        raise ValueError("r_eval must lie in [0, 1]")
    modes = g_hat.modes
    coeffs = _bessel_array(modes, 1j * k * r_eval) / _gain_array(modes, k, ell) * g_hat.values
    return FluenceSpectrum(float(r_eval), ModeSpectrum(coeffs))


def probe_fluence(n, R, k, ell=None):
    """Amplitude ``J_n(ikR)`` of the mode-``n`` excitation on the cell boundary.

    The angular factor is ``e^{-in theta}``; ``ell`` only enters through the
    source normalisation and is accepted for signature symmetry.
    """
    return specfun.bessel_j(n, 1j * k * R)


def bessel_pair_terms(m, n, k, R):
    """``(A, B)`` for the perturbed-boundary expansion, argument ``ikR``.

    ``A = ikR (J'_n J_m + J_n J'_m) + J_n J_m`` and ``B = R J_n J_m``.
    Broadcasts over integer arrays ``m`` and ``n``.
    """
    m, n = np.broadcast_arrays(np.asarray(m, dtype=int), np.asarray(n, dtype=int))
    x = 1j * k * R
    lo = int(min(m.min(initial=0), n.min(initial=0))) - 1
    hi = int(max(m.max(initial=0), n.max(initial=0))) + 1
    orders = np.arange(lo, hi + 1)
    J = np.array([specfun.bessel_j(int(o), x) for o in orders])
    Jm, Jn = J[m - lo], J[n - lo]
    dJm = 0.5 * (J[m - 1 - lo] - J[m + 1 - lo])
    dJn = 0.5 * (J[n - 1 - lo] - J[n + 1 - lo])
    A = x * (dJn * Jm + Jn * dJm) + Jn * Jm
    B = R * Jn * Jm
    if A.ndim == 0:
        return complex(A), complex(B)
    return A, B


def intensity_coeff_unperturbed(n, m, c_hat: ModeSpectrum, geometry, params, omega):
    """``I^n(m) = gamma R J_n(ikR) J_m(ikR) c(n+m) / E_m`` for the round cell."""
    ctx = _context(geometry, params, omega)
    k, R = ctx.k, geometry.R
    x = 1j * k * R
    Em = source_gain(m, k, params.ell)
    return ctx.gamma * R * specfun.bessel_j(n, x) * specfun.bessel_j(m, x) * c_hat[n + m] / Em


def intensity_coeff_linearized(n, m, geometry, fields, params, omega):
    """First-order intensity for the cell ``r = R + eps h``.

    ``fields`` is a mapping (or object) carrying ``c_hat`` (unperturbed
    concentration) and ``psi1_hat`` (first-order density).  The cell
    perturbation comes from ``geometry.h_hat`` and ``geometry.eps``.
    """
    ctx = _context(geometry, params, omega)
    c_hat, psi1_hat = _fields(fields)
    base = intensity_coeff_unperturbed(n, m, c_hat, geometry, params, omega)
    if geometry.eps == 0:
        return base
    q = n + m
    A, B = bessel_pair_terms(m, n, ctx.k, geometry.R)
    ch = (c_hat * geometry.h_hat)[q]
    Em = source_gain(m, ctx.k, params.ell)
    return base + geometry.eps * ctx.gamma * (A * ch - ctx.delta * B * psi1_hat[q]) / Em


def intensity_matrix_unperturbed(n_max, c_hat: ModeSpectrum, ctx: ImagingContext) -> MeasurementMatrix:
    """All ``I^n(m)`` for ``|m|, |n| <= n_max``; entry ``[m, n]``."""
    m, n = index_grid(n_max)
    A, B = bessel_pair_terms(m, n, ctx.k, ctx.R)
    Em = _gain_array(np.arange(-n_max, n_max + 1), ctx.k, ctx.ell)[:, None]
    return MeasurementMatrix(ctx.gamma * B * c_hat.get(m + n) / Em)


def intensity_matrix_linearized(n_max, c_hat, psi1_hat, h_hat, eps, ctx: ImagingContext) -> MeasurementMatrix:
    """Vectorised counterpart of :func:`intensity_coeff_linearized`."""
    base = intensity_matrix_unperturbed(n_max, c_hat, ctx)
    if eps == 0:
        return base
    m, n = index_grid(n_max)
    A, B = bessel_pair_terms(m, n, ctx.k, ctx.R)
    Em = _gain_array(np.arange(-n_max, n_max + 1), ctx.k, ctx.ell)[:, None]
    q = m + n
    first = A * (c_hat * h_hat).get(q) - ctx.delta * B * psi1_hat.get(q)
    return MeasurementMatrix(base.entries + eps * ctx.gamma * first / Em)


def green_coeff_sphere(l, r_prime, k, ell):
    """Radial factor ``j_l(ik r') / (ik j_l'(ik) + j_l(ik)/ell)`` of the ball's Green's function."""
    if l < 0:
        raise ValueError("l must be non-negative")
    if not 0 <= r_prime < 1:
        raise ValueError("r_prime must lie in [0, 1)")
    ik = 1j * k
    denom = ik * specfun.sph_bessel_j_derivative(l, ik) + specfun.sph_bessel_j(l, ik) / ell
    if abs(denom) * ell < 1e-14:
        warnings.warn(f"near-zero Green denominator at l = {l}", RuntimeWarning, stacklevel=2)
    return specfun.sph_bessel_j(l, ik * r_prime) / denom


def graf_sum_2d(k, r, theta, R, phi, m_max=80):
    """Truncated ``sum_m H_m(ikr) J_m(ikR) e^{im(theta-phi)}`` for ``r > R``."""
    if r <= R:
        raise ValueError("Graf expansion needs r > R")
    total = 0j
    for m in range(-m_max, m_max + 1):
        total += specfun.hankel1(m, 1j * k * r) * specfun.bessel_j(m, 1j * k * R) * np.exp(1j * m * (theta - phi))
    return total


def fundamental_solution_2d(k, y, z):
    """``(i/4) H_0(ik |y - z|)`` for ``(-Delta + k^2)``."""
    d = float(np.hypot(*(np.asarray(y, float) - np.asarray(z, float))))
    return 0.25j * specfun.hankel1(0, 1j * k * d)


def sphere_addition_sum(k, y, z, l_max=60):
    """Truncated spherical expansion of ``e^{-k|y-z|} / (4 pi |y-z|)``.

    ``(i kappa / 4 pi) sum_l (2l+1) j_l(kappa r_<) h_l(kappa r_>) P_l(cos gamma)``
    with ``kappa = ik``, so the prefactor is ``-k / 4 pi``.
    """
    y, z = np.asarray(y, float), np.asarray(z, float)
    ry, rz = np.linalg.norm(y), np.linalg.norm(z)
    if ry == rz:
        raise ValueError("points must lie at different radii")
    r_lo, r_hi = min(ry, rz), max(ry, rz)
    cosg = float(np.clip(y @ z / (ry * rz), -1.0, 1.0)) if ry * rz > 0 else 1.0
    ik = 1j * k
    total = 0j
    for l in range(l_max + 1):
        total += (2 * l + 1) * specfun.sph_bessel_j(l, ik * r_lo) * specfun.sph_hankel1(l, ik * r_hi) \
            * special.eval_legendre(l, cosg)
    return 1j * ik / (4 * np.pi) * total


def fundamental_solution_3d(k, y, z):
    d = float(np.linalg.norm(np.asarray(y, float) - np.asarray(z, float)))
    return np.exp(-k * d) / (4 * np.pi * d)


def _context(geometry, params, omega):
    return ImagingContext(params=params, R=geometry.R, omega=omega)


def _fields(fields):
    if isinstance(fields, dict):
        return fields["c_hat"], fields["psi1_hat"]
    return fields.c_hat, fields.psi1_hat
