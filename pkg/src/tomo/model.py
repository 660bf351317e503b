"""Physical parameters, derived constants and the spectral data containers.

Units are millimetres and seconds throughout.  The excitation/emission
medium is homogeneous, so a handful of scalars (``D``, ``k``, ``gamma~``)
together with the cell radius determine every modal coefficient used by
the forward and inverse modules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from . import specfun

CONVENTIONS = ("derived", "legacy")


@dataclass(frozen=True)
class OpticalParams:
    """Medium constants of the coupled diffusion model.

    Attributes
    ----------
    mu : float
        Absorption coefficient (mm^-1).
    mu_s_prime : float
        Reduced scattering coefficient (mm^-1).
    eta : float
        Fluorophore quantum efficiency.
    tau : float
        Fluorescence lifetime (s).
    eps_ext : float
        Fluorophore extinction coefficient (mm^-1 mol^-1).
    delta_resp : float
        Linear response of the fluorophore concentration to the membrane
        potential jump (mol V^-1).
    ell : float
        Extrapolation length of the Robin condition (mm).
    c_light : float
        Speed of light in the medium (mm s^-1).
    dim : int
        Spatial dimension, 2 or 3.
    """

    mu: float = 0.03
    mu_s_prime: float = 0.275
    eta: float = 0.016
    tau: float = 0.56
    eps_ext: float = 5.0e4
    delta_resp: float = 0.91e-6
    ell: float = 1.0
    c_light: float = 3.0e11
    dim: int = 2

    def __post_init__(self):
        for name in ("mu_s_prime", "eta", "tau", "eps_ext", "ell", "c_light"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("mu", "delta_resp"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim!r}")

    @property
    def diffusion(self) -> float:
        """Photon diffusion coefficient ``D = 1/(d mu_s')``."""
        return 1.0 / (self.dim * self.mu_s_prime)


@dataclass(frozen=True)
class MembraneModel:
    """Thin-membrane transmission constant ``beta`` (thickness / conductivity)."""

    beta: float = 0.1

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be strictly positive, got {self.beta!r}")


def wavenumber(params: OpticalParams, omega: float) -> complex:
    """Complex wavenumber with ``k^2 = (mu + i omega/c) / D`` and ``Re k >= 0``.

    A zero wavenumber (no absorption, static source) is returned as ``0j``
    with a ``RuntimeWarning``; several modal formulas degenerate there.
    """
    if omega < 0:
        raise ValueError("omega must be non-negative")
    k2 = (params.mu + 1j * omega / params.c_light) / params.diffusion
    k = complex(np.sqrt(complex(k2)))
    if k.real < 0:
        k = -k
    if k == 0:
        warnings.warn("degenerate wavenumber k = 0", RuntimeWarning, stacklevel=2)
    return k


def gamma_tilde(params: OpticalParams, omega: float) -> complex:
    """Fluorescence conversion factor ``eta eps_ext / (1 - i omega tau)``."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return params.eta * params.eps_ext / (1.0 - 1j * omega * params.tau)


def source_gain(n: int, k: complex, ell: float) -> complex:
    """Robin source weight ``E_n = i k ell J'_n(ik) + J_n(ik)``.

    Driving the boundary with ``E_n e^{-in phi}`` produces the interior
    fluence ``J_n(ikr) e^{-in theta}``.
    """
    ik = 1j * k
    value = ik * ell * specfun.bessel_j_derivative(n, ik) + specfun.bessel_j(n, ik)
    if abs(value) < 1e-14:
        warnings.warn(f"|E_{n}| = {abs(value):.3g}: mode {n} is unusable as a source",
                      RuntimeWarning, stacklevel=2)
    return value


class ModeSpectrum:
    """Band-limited Fourier coefficients ``g^(p)``, ``|p| <= band_limit``.

    Coefficients follow ``g(phi) = sum_p g^(p) e^{i p phi}``.  Indexing with
    an out-of-band integer returns zero.

    Parameters
    ----------
    coeffs : mapping or array
        Either ``{p: value}`` or a length ``2N+1`` array ordered from
        ``-N`` to ``N``.
    band_limit : int, optional
        Required when ``coeffs`` is a mapping with all-zero entries.
    real : bool
        Enforce (and check) conjugate symmetry ``g^(-p) = conj g^(p)``.
    """

    __slots__ = ("band_limit", "_c", "real")

    def __init__(self, coeffs=None, band_limit=None, real=False, atol=1e-12):
        if coeffs is None:
            coeffs = {}
        if isinstance(coeffs, Mapping):
            n = max((abs(int(p)) for p in coeffs), default=0)
            if band_limit is not None:
                if n > band_limit and any(coeffs[p] != 0 for p in coeffs if abs(p) > band_limit):
                    raise ValueError("coefficients outside the band limit")
                n = band_limit
            arr = np.zeros(2 * n + 1, dtype=complex)
            for p, v in coeffs.items():
                if abs(p) <= n:
                    arr[int(p) + n] = v
        else:
            arr = np.array(coeffs, dtype=complex)
            if arr.ndim != 1 or arr.size % 2 != 1:
                raise ValueError("coefficient array must have odd length 2N+1")
            n = arr.size // 2
            if band_limit is not None and band_limit != n:
                arr = _rebanded(arr, band_limit)
                n = band_limit
        self.band_limit = int(n)
        self._c = arr
        self.real = bool(real)
        if real:
            scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
            if np.max(np.abs(arr - np.conj(arr[::-1])), initial=0.0) > atol * scale:
                raise ValueError("spectrum flagged real but not conjugate symmetric")

    @classmethod
    def zeros(cls, band_limit, real=False):
        return cls(np.zeros(2 * band_limit + 1), real=real)

    @classmethod
    def delta(cls, p, value=1.0):
        """Single mode ``value * e^{i p phi}``."""
        return cls({p: value})

    @classmethod
    def from_samples(cls, samples, band_limit, real=False):
        """Fourier coefficients of equispaced samples on ``[0, 2 pi)``."""
        samples = np.asarray(samples)
        n = samples.size
        if 2 * band_limit + 1 > n:
            raise ValueError("not enough samples for the requested band")
        spec = np.fft.fft(samples) / n
        idx = np.arange(-band_limit, band_limit + 1)
        out = cls(spec[idx % n], real=False)
        if real:
            out = out.symmetrized()
        return out

    @property
    def modes(self):
        return np.arange(-self.band_limit, self.band_limit + 1)

    @property
    def values(self):
        """Coefficient array ordered from ``-N`` to ``N`` (a copy)."""
        return self._c.copy()

    def __getitem__(self, p):
        p = int(p)
        if abs(p) > self.band_limit:
            return 0j
        return complex(self._c[p + self.band_limit])

    def get(self, modes):
        """Vectorised lookup; out-of-band modes give zero."""
        modes = np.asarray(modes, dtype=int)
        out = np.zeros(modes.shape, dtype=complex)
        inside = np.abs(modes) <= self.band_limit
        out[inside] = self._c[modes[inside] + self.band_limit]
        return out

    def items(self):
        return zip(self.modes.tolist(), self._c.tolist())

    def support(self, tol=0.0):
        return [p for p, v in self.items() if abs(v) > tol]

    def rebanded(self, band_limit):
        return ModeSpectrum(_rebanded(self._c, band_limit), real=self.real)

    def symmetrized(self):
        sym = 0.5 * (self._c + np.conj(self._c[::-1]))
        return ModeSpectrum(sym, real=True)

    def conj(self):
        """Spectrum of the pointwise conjugate ``conj g(phi)``."""
        return ModeSpectrum(np.conj(self._c[::-1]), real=self.real)

    def scaled(self, factor):
        real = self.real and complex(factor).imag == 0
        return ModeSpectrum(self._c * factor, real=real)

    def map_modes(self, func):
        """Multiply mode ``p`` by ``func(p)`` (vectorised over the mode array)."""
        return ModeSpectrum(self._c * np.asarray(func(self.modes)), real=False)

    def __add__(self, other):
        n = max(self.band_limit, other.band_limit)
        return ModeSpectrum(_rebanded(self._c, n) + _rebanded(other._c, n),
                            real=self.real and other.real)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def __mul__(self, other):
        """Pointwise product of the two functions (exact band-limited convolution)."""
        if not isinstance(other, ModeSpectrum):
            return self.scaled(other)
        return ModeSpectrum(np.convolve(self._c, other._c), real=self.real and other.real)

    def __rmul__(self, factor):
        return self.scaled(factor)

    def __neg__(self):
        return self.scaled(-1.0)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(theta, self.modes)) @ self._c

    def derivative(self):
        """Spectrum of ``d/d phi``."""
        return ModeSpectrum(1j * self.modes * self._c, real=self.real)

    def allclose(self, other, rtol=1e-12, atol=0.0):
        n = max(self.band_limit, other.band_limit)
        return np.allclose(_rebanded(self._c, n), _rebanded(other._c, n), rtol=rtol, atol=atol)

    def __repr__(self):
        nz = {p: v for p, v in self.items() if v != 0}
        return f"ModeSpectrum(band_limit={self.band_limit}, {nz})"


def _rebanded(arr, band_limit):
    n = arr.size // 2
    if band_limit == n:
        return arr.copy()
    if band_limit > n:
        pad = band_limit - n
        return np.concatenate([np.zeros(pad, complex), arr, np.zeros(pad, complex)])
    cut = n - band_limit
    if np.any(arr[:cut] != 0) or np.any(arr[arr.size - cut:] != 0):
        raise ValueError("truncating non-zero coefficients")
    return arr[cut:arr.size - cut].copy()


class MeasurementMatrix:
    """Dense array ``a[m, n]`` over ``m, n in [-n_max, n_max]``.

    ``entries[i, j]`` stores the value at ``m = i - n_max``, ``n = j - n_max``.
    """

    __slots__ = ("n_max", "entries")

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] % 2 != 1:
            raise ValueError("measurement matrix must be square with odd side 2*n_max+1")
        self.n_max = entries.shape[0] // 2
        self.entries = entries

    @classmethod
    def zeros(cls, n_max):
        return cls(np.zeros((2 * n_max + 1, 2 * n_max + 1), dtype=complex))

    @classmethod
    def from_function(cls, n_max, func):
        """Fill by calling ``func(m, n)`` with broadcast integer index grids."""
        m, n = index_grid(n_max)
        return cls(np.broadcast_to(func(m, n), m.shape).astype(complex))

    @property
    def indices(self):
        return index_grid(self.n_max)

    def __getitem__(self, mn):
        m, n = mn
        return complex(self.entries[m + self.n_max, n + self.n_max])

    def __add__(self, other):
        _check_same(self, other)
        return MeasurementMatrix(self.entries + other.entries)

    def __sub__(self, other):
        _check_same(self, other)
        return MeasurementMatrix(self.entries - other.entries)

    def scaled(self, factor):
        return MeasurementMatrix(self.entries * factor)

    def frobenius(self):
        return float(np.linalg.norm(self.entries))


def _check_same(a, b):
    if a.n_max != b.n_max:
        raise ValueError(f"n_max mismatch: {a.n_max} vs {b.n_max}")


def index_grid(n_max):
    """Integer grids ``(m, n)`` with ``m`` varying along axis 0."""
    idx = np.arange(-n_max, n_max + 1)
    return np.meshgrid(idx, idx, indexing="ij")


@dataclass(frozen=True)
class CellGeometry:
    """Disk cell of radius ``R`` with boundary ``r = R + eps h(theta)``."""

    R: float
    eps: float = 0.0
    h_hat: ModeSpectrum = field(default_factory=lambda: ModeSpectrum.zeros(0, real=True))

    def __post_init__(self):
        if not 0 < self.R < 1:
            raise ValueError(f"cell radius must satisfy 0 < R < 1, got {self.R!r}")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        h = self.h_hat
        if np.max(np.abs(h.values - np.conj(h.values[::-1])), initial=0.0) > 1e-12 * max(
                1.0, float(np.max(np.abs(h.values), initial=0.0))):
            raise ValueError("h must be a real function (conjugate-symmetric spectrum)")


@dataclass(frozen=True)
class ImagingContext:
    """Everything needed to evaluate modal coefficients for one experiment.

    ``convention`` selects between the coefficient set derived and checked
    against the brute-force solvers (``"derived"``) and an older closed-form
    set (``"legacy"``) kept for comparison; see ``README.md`` for the list
    of differences.
    """

    params: OpticalParams = field(default_factory=OpticalParams)
    membrane: MembraneModel = field(default_factory=MembraneModel)
    R: float = 0.05
    omega: float = 1.0e9
    convention: str = "derived"

    def __post_init__(self):
        if not 0 < self.R < 1:
            raise ValueError(f"cell radius must satisfy 0 < R < 1, got {self.R!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")

    @cached_property
    def k(self) -> complex:
        return wavenumber(self.params, self.omega)

    @cached_property
    def gamma(self) -> complex:
        return gamma_tilde(self.params, self.omega)

    @property
    def beta(self) -> float:
        return self.membrane.beta

    @property
    def delta(self) -> float:
        return self.params.delta_resp

    @property
    def ell(self) -> float:
        return self.params.ell

    def with_radius(self, R):
        return replace(self, R=R)

    def updated(self, **changes):
        return replace(self, **changes)


def default_context(R=0.05, omega=1.0e9, beta=0.1, convention="derived") -> ImagingContext:
    """Context with the tabulated medium and fluorophore constants."""
    return ImagingContext(OpticalParams(), MembraneModel(beta), R=R, omega=omega,
                          convention=convention)


def hermitian_spectrum(modes: Iterable[tuple[int, complex]]) -> ModeSpectrum:
    """Real-function spectrum from ``(p, value)`` pairs with ``p >= 0``."""
    coeffs = {}
    for p, v in modes:
        p = int(p)
        coeffs[p] = complex(v)
        if p != 0:
            coeffs[-p] = np.conj(complex(v))
        elif complex(v).imag != 0:
            raise ValueError("mode 0 of a real function must be real")
    return ModeSpectrum(coeffs, real=True)
