"""Linearised measurement operator and least-squares membrane reconstruction.

With a single applied mode ``z`` the first-order data only couple
``h(p)`` to the anti-diagonal ``m + n = p + z``::

    Q[h]_{m,n} = eps F_{m,n}(z) h(m + n - z)

so the normal equations are diagonal and the estimate is a weighted sum
along one anti-diagonal per mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cellfield
from .forward import _gain_array, bessel_pair_terms
from .model import ImagingContext, MeasurementMatrix, ModeSpectrum, index_grid

UNRESOLVABLE_THRESHOLD = 1e-30


class UnresolvableModeError(ValueError):
    """The normal-equation weight of one or more modes is below the threshold."""

    def __init__(self, modes, weights, threshold):
        self.modes = list(modes)
        self.weights = list(weights)
        self.threshold = threshold
        super().__init__(f"modes {self.modes} not estimable: sum |F|^2 below {threshold:g}")


@dataclass(frozen=True)
class NoiseModel:
    """Additive circular complex Gaussian noise of standard deviation ``sigma_noise``."""

    sigma_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_noise >= 0:
            raise ValueError("sigma_noise must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ReconstructionResult:
    """Estimated perturbation spectrum and predicted per-mode variance."""

    h_est_hat: ModeSpectrum
    predicted_var: dict
    M: int
    z: int
    weights: dict = field(default_factory=dict)

    def std(self, p):
        return float(np.sqrt(self.predicted_var[p]))


def default_truncation(z, M):
    return max(64, 8 * (abs(z) + M))


def mode_weight_coefficients(z, q, ctx: ImagingContext):
    """``(a, b_q)`` with ``F_{m,n}(z) = a A_{m,n} + b_{m+n} B_{m,n}``.

    ``a`` does not depend on ``q``; ``b`` is returned with the shape of ``q``.
    """
    if z == 0:
        raise ValueError("z must be non-zero")
    R, beta, delta, gamma = ctx.R, ctx.beta, ctx.delta, ctx.gamma
    Z = abs(z)
    q = np.asarray(q)
    Q = np.abs(q)
    H = cellfield.harmonic_part_spectrum(z, R, beta, convention=ctx.convention)[z]
    if ctx.convention == "derived":
        U = H / (1.0 + beta * Z / (2 * R))
        a = 2 * np.pi * gamma * delta * beta * U * Z / R
        b = 2 * np.pi * gamma * delta * (beta / R ** 2) * U \
            * (q * z - Z + beta * q * z * Z / (2 * R)) / (1.0 + beta * Q / (2 * R))
    else:
        pre = 2 * np.pi * delta * beta * gamma * H
        a = pre / (1.0 + beta * Z / (2 * R))
        b = pre / (1.0 + beta * Q / (2 * R)) \
            * ((q - z) * z + Z * (Z - 1) + (beta / R) * Z ** 2 / (2 * R + beta * Z))
    return a, b


def f_weight(m, n, z, R, beta, k, params, omega, convention="derived"):
    """Operator weight ``F_{m,n}(z)`` (broadcasts over integer ``m``, ``n``)."""
    from .model import MembraneModel

    ctx = ImagingContext(params=params, membrane=MembraneModel(beta), R=R, omega=omega,
                         convention=convention)
    if not np.isclose(ctx.k, k, rtol=1e-12, atol=0):
        raise ValueError("k is inconsistent with params and omega")
    return f_weight_ctx(m, n, z, ctx)


def f_weight_ctx(m, n, z, ctx: ImagingContext):
    m, n = np.broadcast_arrays(np.asarray(m, int), np.asarray(n, int))
    A, B = bessel_pair_terms(m, n, ctx.k, ctx.R)
    a, b = mode_weight_coefficients(z, m + n, ctx)
    out = a * A + b * B
    return complex(out) if np.ndim(out) == 0 else out


def weight_matrix(z, n_max, ctx: ImagingContext) -> MeasurementMatrix:
    m, n = index_grid(n_max)
    return MeasurementMatrix(f_weight_ctx(m, n, z, ctx))


def apply_Q(h_hat: ModeSpectrum, z, eps, ctx: ImagingContext, n_max=10) -> MeasurementMatrix:
    """``Q[h]_{m,n} = eps F_{m,n}(z) h(m + n - z)`` on ``|m|, |n| <= n_max``."""
    m, n = index_grid(n_max)
    hv = h_hat.get(m + n - z)
    out = np.zeros(m.shape, complex)
    nz = hv != 0
    if np.any(nz):
        out[nz] = eps * f_weight_ctx(m[nz], n[nz], z, ctx) * hv[nz]
    return MeasurementMatrix(out)


def boundary_term(w_hat: ModeSpectrum, eps, n_max, ctx: ImagingContext) -> MeasurementMatrix:
    """Contribution of the measured voltage change, removed during assembly."""
    m, n = index_grid(n_max)
    _, B = bessel_pair_terms(m, n, ctx.k, ctx.R)
    q = m + n
    kappa = cellfield.jump_gain(q, ctx.R, ctx.beta)
    return MeasurementMatrix(eps * ctx.gamma * B * ctx.delta * 2 * np.pi * kappa * w_hat.get(q))


def assemble_data(I_eps: MeasurementMatrix, I_0: MeasurementMatrix, w_hat: ModeSpectrum, eps,
                  ctx: ImagingContext) -> MeasurementMatrix:
    """``a_{m,n} = 2 pi E_m (I_eps - I_0) - eps gamma B beta pi delta kappa' w(m+n)``.

    ``kappa' = N R^(N-1) / (1 + beta N/(2R))`` with ``N = |m+n|``.
    """
    if I_eps.n_max != I_0.n_max:
        raise ValueError(f"n_max mismatch: {I_eps.n_max} vs {I_0.n_max}")
    n_max = I_eps.n_max
    Em = _gain_array(np.arange(-n_max, n_max + 1), ctx.k, ctx.ell)[:, None]
    diff = 2 * np.pi * Em * (I_eps.entries - I_0.entries)
    return MeasurementMatrix(diff - boundary_term(w_hat, eps, n_max, ctx).entries)


def data_from_Q(Qh: MeasurementMatrix, I_0: MeasurementMatrix, w_hat, eps, ctx) -> MeasurementMatrix:
    """Intensity matrix whose assembled data equal ``Qh`` (inverse of the assembly)."""
    n_max = Qh.n_max
    Em = _gain_array(np.arange(-n_max, n_max + 1), ctx.k, ctx.ell)[:, None]
    total = Qh.entries + boundary_term(w_hat, eps, n_max, ctx).entries
    return MeasurementMatrix(I_0.entries + total / (2 * np.pi * Em))


def standard_normal_complex(shape, seed):
    """Circular complex Gaussians with ``E|W|^2 = 1``.

    Uniforms come from the counter-based Philox generator; the polar
    Box-Muller map ``sqrt(-log u1) e^{2 pi i u2}`` turns each pair into one
    complex variate with independent ``N(0, 1/2)`` parts.
    """
    shape = tuple(shape)
    size = int(np.prod(shape))
    rng = np.random.Generator(np.random.Philox(int(seed)))
    u = rng.random((2, size))
    u1 = 1.0 - u[0]  # in (0, 1]
    return (np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u[1])).reshape(shape)


def add_noise(a: MeasurementMatrix, noise: NoiseModel) -> MeasurementMatrix:
    if noise.sigma_noise == 0:
        return MeasurementMatrix(a.entries.copy())
    W = standard_normal_complex(a.entries.shape, noise.seed)
    return MeasurementMatrix(a.entries + noise.sigma_noise * W)


def diagonal_weights(p_modes, z, n_max, ctx: ImagingContext, J_trunc=None):
    """``sum_j |F_{j, p+z-j}|^2`` over the data square, at most ``|j| <= J_trunc``."""
    p_modes = np.atleast_1d(np.asarray(p_modes, int))
    J = n_max if J_trunc is None else min(J_trunc, n_max)
    out = np.zeros(p_modes.size)
    for i, p in enumerate(p_modes):
        j, nn = _antidiagonal(p + z, n_max, J)
        if j.size:
            out[i] = float(np.sum(np.abs(f_weight_ctx(j, nn, z, ctx)) ** 2))
    return out


def _antidiagonal(q, n_max, J):
    j = np.arange(-J, J + 1)
    nn = q - j
    keep = np.abs(nn) <= n_max
    return j[keep], nn[keep]


def least_squares(a_meas: MeasurementMatrix, z, eps, M, ctx: ImagingContext, sigma_noise=0.0,
                  J_trunc=None, threshold=UNRESOLVABLE_THRESHOLD, strict=True) -> ReconstructionResult:
    """Diagonal normal-equation estimate of ``h(p)``, ``|p| <= M``.

    ``h_est(p) = sum_j conj(F) a / (eps sum_j |F|^2)`` along ``m + n = p + z``
    and ``var(p) = (sigma/eps)^2 / sum_j |F|^2``.  Modes whose weight is
    below ``threshold`` raise :class:`UnresolvableModeError` (``strict``) or
    are reported with zero estimate and infinite variance.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if M < 0:
        raise ValueError("M must be non-negative")
    if eps ** 2 * M >= 1:
        warnings.warn("eps^2 M is not small: the linearisation is unreliable", RuntimeWarning,
                      stacklevel=2)
    n_max = a_meas.n_max
    J = default_truncation(z, M) if J_trunc is None else J_trunc
    J = min(J, n_max)
    est = np.zeros(2 * M + 1, complex)
    var, weights, bad = {}, {}, []
    for i, p in enumerate(range(-M, M + 1)):
        j, nn = _antidiagonal(p + z, n_max, J)
        F = f_weight_ctx(j, nn, z, ctx) if j.size else np.zeros(0, complex)
        wsum = float(np.sum(np.abs(F) ** 2))
        weights[p] = wsum
        if not wsum >= threshold:
            bad.append(p)
            var[p] = float("inf")
            continue
        data = a_meas.entries[j + n_max, nn + n_max]
        est[i] = np.sum(np.conj(F) * data) / (eps * wsum)
        var[p] = (sigma_noise / eps) ** 2 / wsum
    if bad and strict:
        raise UnresolvableModeError(bad, [weights[p] for p in bad], threshold)
    return ReconstructionResult(ModeSpectrum(est), var, M, z, weights)
