"""Membrane potential of a round cell and its first-order shape derivative.

The cell ``C`` is the disk ``r < R`` inside the unit disk.  For applied
Neumann data ``g = sum_n g(n) e^{in theta}`` on ``r = 1`` the potential is
harmonic on both sides of ``r = R`` with continuous flux and the membrane
jump ``u+ - u- = beta du/dr``.  Mode by mode::

    inside   u = a_n r^N
    outside  u = b_n r^N + c_n r^-N,     N = |n|

Everything is returned as boundary spectra.  ``convention="legacy"``
selects an older closed-form set that carries the power
``R^(2N-2)`` where the transmission solve gives ``R^(2N-1)`` and a
different first-order density; ``"derived"`` is the default.  The
difference is quantified in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CONVENTIONS, CellGeometry, ModeSpectrum


class SingularSystemError(ArithmeticError):
    """A per-mode transmission system is (numerically) singular."""


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")


def _applied(z, g_hat):
    if g_hat is None:
        if z == 0:
            raise ValueError("the applied field mode z must be non-zero")
        return ModeSpectrum.delta(z)
    if abs(g_hat[0]) > 0:
        raise ValueError("applied Neumann data must have zero mean")
    return g_hat


def _mode_factors(modes, R, beta, convention):
    N = np.abs(modes).astype(float)
    D = 2.0 * (1.0 + beta * N / (2 * R))
    power = 2 * N - (2.0 if convention == "legacy" else 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        P = beta * N * np.where(N > 0, R ** power, 0.0)
    den = D - P
    if np.any((N > 0) & (np.abs(den) < 1e-300)):
        raise SingularSystemError("vanishing transmission denominator")
    return N, D, P, den


def boundary_potential_spectrum(z, R, beta, g_hat=None, convention="derived") -> ModeSpectrum:
    """Trace ``f0 = u|_{r=1}`` for applied data ``e^{iz theta}`` (or ``g_hat``)."""
    _check_convention(convention)
    g = _applied(z, g_hat)
    N, D, P, den = _mode_factors(g.modes, R, beta, convention)
    safe = np.where(N > 0, N, 1.0)
    vals = np.where(N > 0, g.values / safe * (D + P) / den, 0.0)
    return ModeSpectrum(vals)


def harmonic_part_spectrum(z, R, beta, g_hat=None, convention="derived") -> ModeSpectrum:
    """Trace of the harmonic part ``H`` on the membrane, the mean of ``u+`` and ``u-``."""
    _check_convention(convention)
    g = _applied(z, g_hat)
    N, D, P, den = _mode_factors(g.modes, R, beta, convention)
    safe = np.where(N > 0, N, 1.0)
    vals = np.where(N > 0, g.values / safe * D / den * R ** N, 0.0)
    return ModeSpectrum(vals)


def psi_spectrum(H_hat: ModeSpectrum, R, beta) -> ModeSpectrum:
    """Membrane density ``Psi(n) = -beta (N/R) H(n) / (1 + beta N/(2R))``.

    ``Psi`` equals minus the potential jump, so the fluorophore
    concentration is ``c = -delta Psi``.
    """
    if abs(H_hat[0]) > 0:
        raise ValueError("H must have zero mean")
    N = np.abs(H_hat.modes)
    return H_hat.map_modes(lambda n: -beta * (np.abs(n) / R) / (1.0 + beta * np.abs(n) / (2 * R)))


def concentration(psi_hat: ModeSpectrum, delta) -> ModeSpectrum:
    """Fluorophore concentration on the membrane, ``c = -delta Psi``."""
    return psi_hat.scaled(-delta)


@dataclass(frozen=True)
class ElectroState:
    """Unperturbed electrostatic solution for one applied field."""

    g_hat: ModeSpectrum
    f0_hat: ModeSpectrum
    H_hat: ModeSpectrum
    Psi_hat: ModeSpectrum
    c_hat: ModeSpectrum
    u_in_hat: ModeSpectrum
    geometry: CellGeometry
    beta: float
    delta: float
    convention: str = "derived"

    @property
    def z_mode(self):
        """The applied mode when ``g`` is a single exponential, else ``None``."""
        support = self.g_hat.support()
        return support[0] if len(support) == 1 else None

    @property
    def R(self):
        return self.geometry.R


def electro_state(z, geometry: CellGeometry, beta, delta, g_hat=None, convention="derived") -> ElectroState:
    """Solve the unperturbed transmission problem for ``e^{iz theta}`` (or ``g_hat``)."""
    g = _applied(z, g_hat)
    R = geometry.R
    f0 = boundary_potential_spectrum(z, R, beta, g, convention)
    H = harmonic_part_spectrum(z, R, beta, g, convention)
    psi = psi_spectrum(H, R, beta)
    c = concentration(psi, delta)
    u_in = H.map_modes(lambda n: 1.0 / (1.0 + beta * np.abs(n) / (2 * R)))
    real = g.real
    return ElectroState(g, f0, H, psi, c, u_in, geometry, beta, delta, convention) if not real else \
        ElectroState(g, f0.symmetrized(), H.symmetrized(), psi.symmetrized(), c.symmetrized(),
                     u_in.symmetrized(), geometry, beta, delta, convention)


def _coupled(h_hat: ModeSpectrum, u_hat: ModeSpectrum, kernel):
    """``out(q) = sum_p h(p) u(q-p) kernel(q, q-p)`` over both bands."""
    band = h_hat.band_limit + u_hat.band_limit
    q = np.arange(-band, band + 1)
    out = np.zeros(q.size, dtype=complex)
    for p, hp in h_hat.items():
        if hp == 0:
            continue
        s = q - p
        out += hp * u_hat.get(s) * kernel(q, s)
    return ModeSpectrum(out)


def jump_data(state: ElectroState, h_hat: ModeSpectrum):
    """Right-hand sides ``(S, T)`` of the interface conditions for ``w``.

    ``S`` is the jump of the normal derivative and ``T`` the value of
    ``[w] - beta dw/dr|_-`` on ``r = R``.
    """
    R, beta, U = state.R, state.beta, state.u_in_hat
    T = _coupled(h_hat, U, lambda q, s: (beta / R ** 2) * (q * s - np.abs(s)))
    S = _coupled(h_hat, U, lambda q, s: -(beta / R ** 3) * q * s * np.abs(s))
    return S, T


@dataclass(frozen=True)
class WField:
    """Coefficients of ``w`` in each subdomain, scaled to be ``O(1)``.

    Mode ``q`` of ``w`` is ``alpha (r/R)^N`` inside and
    ``b (r/R)^N + c (R/r)^N`` in the annulus; for ``q = 0`` the inside
    value is the constant ``alpha`` and the annulus carries zero.
    """

    modes: np.ndarray
    alpha: np.ndarray
    b: np.ndarray
    c: np.ndarray
    R: float

    def boundary(self) -> ModeSpectrum:
        N = np.abs(self.modes)
        return ModeSpectrum(self.b * self.R ** (-N) + self.c * self.R ** N)

    def jump(self) -> ModeSpectrum:
        return ModeSpectrum(self.b + self.c - self.alpha)

    def inner_trace(self) -> ModeSpectrum:
        return ModeSpectrum(self.alpha.copy())

    def evaluate(self, r, theta):
        """``w(r, theta)`` at scalar ``r`` (either side of the membrane)."""
        N = np.abs(self.modes)
        if r < self.R:
            coef = self.alpha * (r / self.R) ** N
        else:
            coef = self.b * (r / self.R) ** N + self.c * (self.R / r) ** N
        return ModeSpectrum(coef).evaluate(theta)


def w_solution(state: ElectroState, h_hat: ModeSpectrum) -> WField:
    """Solve the shape-derivative problem mode by mode.

    For ``N = |q| > 0`` the scaled unknowns satisfy::

        (N/R) (b - c - alpha)                 = S_q
        b + c - alpha - beta (N/R) alpha      = T_q
        b - c R^(2N)                          = 0      (dw/dr = 0 at r = 1)

    Mode zero has no flux and zero mean on ``r = 1``, so ``alpha = -T_0``.
    """
    S, T = jump_data(state, h_hat)
    R, beta = state.R, state.beta
    modes = S.modes
    alpha = np.zeros(modes.size, complex)
    b = np.zeros(modes.size, complex)
    c = np.zeros(modes.size, complex)
    Sv, Tv = S.values, T.values
    for i, q in enumerate(modes):
        N = abs(int(q))
        if N == 0:
            alpha[i] = -Tv[i]
            continue
        if Sv[i] == 0 and Tv[i] == 0:
            continue
        M = np.array([[-N / R, N / R, -N / R],
                      [-(1.0 + beta * N / R), 1.0, 1.0],
                      [0.0, 1.0, -R ** (2 * N)]])
        det = np.linalg.det(M)
        if abs(det) < 1e-14 * np.abs(M).max() ** 3:
            raise SingularSystemError(f"singular w-system at mode {q}")
        alpha[i], b[i], c[i] = np.linalg.solve(M, np.array([Sv[i], Tv[i], 0.0]))
    return WField(modes, alpha, b, c, R)


def w_spectrum(state: ElectroState, h_hat: ModeSpectrum) -> ModeSpectrum:
    """Trace of the shape derivative ``w`` on ``r = 1`` (zero mean)."""
    w = w_solution(state, h_hat).boundary()
    assert abs(w[0]) <= 1e-14 * max(1.0, np.abs(w.values).max()), "w must have zero mean"
    return w


def jump_gain(q, R, beta):
    """``kappa_q``: the part of ``[w]_q`` proportional to the boundary trace ``w(q)``."""
    N = np.abs(np.asarray(q, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * beta * N * np.where(N > 0, R ** (N - 1), 0.0) / (1.0 + beta * N / (2 * R))
    return val


def jump_remainder(state: ElectroState, h_hat: ModeSpectrum) -> ModeSpectrum:
    """``[w]_q - kappa_q w(q)``; for ``q = 0`` this is ``T_0``."""
    S, T = jump_data(state, h_hat)
    N = np.abs(S.modes)
    rem = (T.values - 0.5 * state.beta * S.values) / (1.0 + state.beta * N / (2 * state.R))
    return ModeSpectrum(rem)


def psi1_spectrum(state: ElectroState, h_hat: ModeSpectrum, w_hat: ModeSpectrum,
                  convention=None) -> ModeSpectrum:
    """First-order membrane density ``Psi_1`` given the boundary trace of ``w``.

    ``derived``: ``Psi_1 = -[w] = -kappa w - (T - beta S/2)/(1 + beta N/(2R))``.
    ``legacy``: the older closed form in terms of ``H``.
    """
    convention = convention or state.convention
    _check_convention(convention)
    R, beta = state.R, state.beta
    rem_band = h_hat.band_limit + state.H_hat.band_limit
    n = max(rem_band, w_hat.band_limit)
    modes = np.arange(-n, n + 1)
    first = -jump_gain(modes, R, beta) * w_hat.rebanded(n).values
    if convention == "derived":
        rest = -jump_remainder(state, h_hat).rebanded(n).values
    else:
        def kern(q, s):
            S_ = np.abs(s)
            return (s * (q - s) + S_ * (S_ - 1) + (beta / R) * S_ ** 2 / (2 * R + beta * S_)) \
                / (1.0 + beta * np.abs(q) / (2 * R))
        rest = -beta * _coupled(h_hat, state.H_hat, kern).rebanded(n).values
    return ModeSpectrum(first + rest)
