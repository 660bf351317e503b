"""Brute-force reference solvers.

Nothing in the analytic pipeline imports this module.  The solvers here
discretise the underlying boundary-value problems directly (finite
differences per angular mode, collocation for the perturbed membrane,
trapezoidal quadrature for boundary integrals) so the closed-form modal
coefficients can be checked against something that does not share their
algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import specfun
from .forward import FluenceSpectrum
from .model import CellGeometry, ModeSpectrum, source_gain


class OracleError(RuntimeError):
    """A reference solve failed (singular or badly conditioned system)."""


@dataclass(frozen=True)
class PolarGrid:
    """Uniform radial nodes ``r_j = j / n_r`` and ``n_theta`` angles on ``[0, 2 pi)``."""

    n_r: int = 512
    n_theta: int = 256
    r_max: float = 1.0

    def __post_init__(self):
        if self.n_r < 4:
            raise ValueError("n_r must be at least 4")
        if self.n_theta % 2:
            raise ValueError("n_theta must be even")
        if self.r_max != 1.0:
            raise ValueError("the domain is the unit disk")

    @property
    def r(self):
        return np.linspace(0.0, 1.0, self.n_r + 1)

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta


def _solve_banded(lower, diag, upper, rhs):
    n = diag.size
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    try:
        return linalg.solve_banded((1, 1), ab, rhs)
    except linalg.LinAlgError as exc:
        raise OracleError(str(exc)) from exc


def _radial_robin(m, k, ell, data, n_r, curvature=1):
    """Second-order FD for ``u'' + (c/r) u' - (m(m+c-1)/r^2 + k^2) u = 0`` on ``[0, 1]``.

    ``c = 1`` is the cylindrical radial operator (``m`` the angular order),
    ``c = 2`` the spherical one (``m`` the degree ``l``).  Robin data
    ``ell u'(1) + u(1) = data`` is imposed through a ghost node.
    """
    h = 1.0 / n_r
    r = np.linspace(0.0, 1.0, n_r + 1)
    k2 = complex(k) ** 2
    lam = m * m if curvature == 1 else m * (m + 1)
    n = n_r + 1
    lower = np.zeros(n - 1, complex)
    diag = np.zeros(n, complex)
    upper = np.zeros(n - 1, complex)
    rhs = np.zeros(n, complex)
    # regularity at the origin
    if m == 0:
        diag[0] = -2 * (curvature + 1) / h ** 2 - k2
        upper[0] = 2 * (curvature + 1) / h ** 2
    else:
        diag[0] = 1.0
    j = np.arange(1, n_r)
    rj = r[j]
    lower[j - 1] = 1 / h ** 2 - curvature / (2 * h * rj)
    diag[j] = -2 / h ** 2 - lam / rj ** 2 - k2
    upper[j] = 1 / h ** 2 + curvature / (2 * h * rj)
    # ghost node u_{N+1} = u_{N-1} + 2h (data - u_N) / ell
    lo_c = 1 / h ** 2 - curvature / (2 * h)
    up_c = 1 / h ** 2 + curvature / (2 * h)
    lower[n_r - 1] = lo_c + up_c
    diag[n_r] = -2 / h ** 2 - lam - k2 - up_c * 2 * h / ell
    rhs[n_r] = -up_c * 2 * h * data / ell
    return r, _solve_banded(lower, diag, upper, rhs)


def helmholtz_robin_solve(g_hat: ModeSpectrum, k, ell, grid: PolarGrid, r_eval=0.5) -> FluenceSpectrum:
    """FD fluence spectrum on ``|x| = r_eval`` for Robin data ``g`` on the unit circle."""
    if not grid.n_r >= 16 * max(1.0, abs(k)):
        raise ValueError("grid does not resolve the wavenumber")
    j = r_eval * grid.n_r
    if abs(j - round(j)) > 1e-9:
        raise ValueError("r_eval must be a grid node")
    j = int(round(j))
    out = np.zeros(g_hat.modes.size, complex)
    for i, (m, gm) in enumerate(g_hat.items()):
        if gm == 0:
            continue
        _, u = _radial_robin(abs(m), k, ell, gm, grid.n_r, curvature=1)
        out[i] = u[j]
    return FluenceSpectrum(float(r_eval), ModeSpectrum(out))


def sphere_radial_solve(l, k, ell, r_prime, n_r=512):
    """Radial factor of the ball's Robin Green's function, by FD."""
    j = r_prime * n_r
    if abs(j - round(j)) > 1e-9:
        raise ValueError("r_prime must be a grid node")
    _, u = _radial_robin(l, k, ell, ell, n_r, curvature=2)
    return complex(u[int(round(j))])


# ---------------------------------------------------------------- transmission

@dataclass(frozen=True)
class TransmissionResult:
    """Per-mode traces of a transmission solve.

    ``outer``: trace on ``r = 1``; ``inner``/``outer_R``: traces on
    ``r = R`` from inside and outside; ``jump = outer_R - inner``.
    """

    outer: ModeSpectrum
    inner: ModeSpectrum
    outer_R: ModeSpectrum
    flux_in: ModeSpectrum
    flux_out: ModeSpectrum
    flux_boundary: ModeSpectrum

    @property
    def jump(self):
        return self.outer_R - self.inner

    @property
    def harmonic(self):
        return (self.outer_R + self.inner).scaled(0.5)


def _radial_transmission(N, R, beta, S, T, g, n_r):
    """Laplace per angular mode with interface data and Neumann ``g`` at ``r = 1``.

    Inside ``[0, R]`` uses uniform ``r``; the annulus uses uniform
    ``s = log r`` where the mode equation has constant coefficients.
    The interface node is duplicated and both one-sided derivatives are
    second order.  Returns ``(u_in(R), u_out(R), u_out(1), du_in(R),
    du_out(R), du_out(1))``.
    """
    ni = no = n_r
    hi = R / ni
    s0 = np.log(R)
    hs = -s0 / no
    n = ni + 1 + no + 1
    A = np.zeros((n, n), complex)
    b = np.zeros(n, complex)
    io = ni + 1  # first outer index
    # inside
    if N == 0:
        A[0, 0], A[0, 1] = -4 / hi ** 2, 4 / hi ** 2
    else:
        A[0, 0] = 1.0
    for j in range(1, ni):
        r = j * hi
        A[j, j - 1] = 1 / hi ** 2 - 1 / (2 * hi * r)
        A[j, j] = -2 / hi ** 2 - N * N / r ** 2
        A[j, j + 1] = 1 / hi ** 2 + 1 / (2 * hi * r)
    # outside: u_ss - N^2 u = 0
    for j in range(1, no):
        A[io + j, io + j - 1] = 1 / hs ** 2
        A[io + j, io + j] = -2 / hs ** 2 - N * N
        A[io + j, io + j + 1] = 1 / hs ** 2
    d_in = np.zeros(n)
    d_in[ni], d_in[ni - 1], d_in[ni - 2] = 1.5 / hi, -2 / hi, 0.5 / hi
    d_out = np.zeros(n)
    d_out[io], d_out[io + 1], d_out[io + 2] = -1.5 / (hs * R), 2 / (hs * R), -0.5 / (hs * R)
    d_bnd = np.zeros(n)
    last = n - 1
    d_bnd[last], d_bnd[last - 1], d_bnd[last - 2] = 1.5 / hs, -2 / hs, 0.5 / hs
    # flux continuity, ordered so the scales match the Laplacian rows
    A[ni] = R * (d_out - d_in)
    b[ni] = R * S
    # potential jump
    A[io] = -beta * d_in
    A[io, io] += 1.0
    A[io, ni] -= 1.0
    b[io] = T
    if N == 0:
        # compatibility fixes the flux; pin the mean on the outer circle
        A[last, last] = 1.0
        b[last] = 0.0
    else:
        A[last] = d_bnd
        b[last] = g
    try:
        u = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise OracleError(str(exc)) from exc
    if not np.all(np.isfinite(u)):
        raise OracleError("non-finite transmission solution")
    return u[ni], u[io], u[last], d_in @ u, d_out @ u, d_bnd @ u


def radial_transmission_solve(R, beta, g_hat: ModeSpectrum, n_r=512, S_hat=None, T_hat=None) -> TransmissionResult:
    """Mode-wise FD transmission solve with optional inhomogeneous interface data.

    Conditions on ``r = R``: ``du+/dr - du-/dr = S`` and
    ``u+ - u- - beta du-/dr = T``.  On ``r = 1``: ``du/dr = g`` and,
    for mode zero, zero mean.
    """
    S_hat = S_hat or ModeSpectrum.zeros(0)
    T_hat = T_hat or ModeSpectrum.zeros(0)
    band = max(g_hat.band_limit, S_hat.band_limit, T_hat.band_limit)
    modes = np.arange(-band, band + 1)
    cols = [np.zeros(modes.size, complex) for _ in range(6)]
    for i, q in enumerate(modes):
        S, T, g = S_hat[q], T_hat[q], g_hat[q]
        if S == 0 and T == 0 and g == 0:
            continue
        vals = _radial_transmission(abs(int(q)), R, beta, S, T, g, n_r)
        for c, v in zip(cols, vals):
            c[i] = v
    u_in, u_out, u_bnd, du_in, du_out, du_bnd = (ModeSpectrum(c) for c in cols)
    return TransmissionResult(u_bnd, u_in, u_out, du_in, du_out, du_bnd)


def transmission_solve(z, R, beta, grid: PolarGrid | None = None, geometry_perturbation=None, K=32):
    """Reference potential for applied data ``e^{iz theta}``.

    Without a perturbation this is the radial FD solve; with
    ``(eps, h_hat)`` the membrane ``r = R + eps h`` is handled by
    collocation (:func:`perturbed_transmission_solve`).
    """
    g = ModeSpectrum.delta(z)
    if geometry_perturbation is None:
        n_r = grid.n_r if grid is not None else 512
        return radial_transmission_solve(R, beta, g, n_r=n_r)
    eps, h_hat = geometry_perturbation
    n_theta = grid.n_theta if grid is not None else 256
    return perturbed_transmission_solve(g, CellGeometry(R, eps, h_hat), beta, K=K, n_theta=n_theta)


@dataclass(frozen=True)
class PerturbedSolution:
    """Collocation solution for a membrane ``r = rho(theta)``.

    Inside ``u = sum a_n (r/R)^N e^{in theta}``; in the annulus
    ``u = sum [b_n ((R/r)^N + R^{2N} (r/R)^N) + g_n (r^N - r^-N)/(2N)] e^{in theta}``.
    """

    modes: np.ndarray
    a: np.ndarray
    b: np.ndarray
    g: np.ndarray
    geometry: CellGeometry
    beta: float
    residual: float
    cond: float

    def rho(self, theta):
        gm = self.geometry
        return gm.R + gm.eps * gm.h_hat.evaluate(theta).real

    def rho_prime(self, theta):
        gm = self.geometry
        return gm.eps * gm.h_hat.derivative().evaluate(theta).real

    def _fields(self, r, theta, side):
        N = np.abs(self.modes)
        R = self.geometry.R
        E = np.exp(1j * np.outer(theta, self.modes))
        r = np.asarray(r, float)[:, None]
        if side == "in":
            val = self.a * (r / R) ** N
            dr = self.a * N / R * (r / R) ** np.maximum(N - 1, 0)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                gN = np.where(N > 0, self.g / np.where(N > 0, 2 * N, 1), 0.0)
            val = self.b * ((R / r) ** N + R ** (2 * N) * (r / R) ** N) + gN * (r ** N - r ** (-N.astype(float)))
            dr = self.b * N * (-(R / r) ** N / r + R ** (2 * N) * (r / R) ** N / r) \
                + gN * N * (r ** (N - 1.0) + r ** (-N - 1.0))
        u = np.sum(val * E, axis=1)
        u_r = np.sum(dr * E, axis=1)
        u_t = np.sum(1j * self.modes * val * E, axis=1)
        return u, u_r, u_t

    def membrane_traces(self, theta):
        """``(u-, u+, du/dnu)`` on the membrane at angles ``theta``."""
        theta = np.asarray(theta, float)
        rho, rp = self.rho(theta), self.rho_prime(theta)
        ui, uri, uti = self._fields(rho, theta, "in")
        uo, _, _ = self._fields(rho, theta, "out")
        dnu = (rho * uri - rp / rho * uti) / np.sqrt(rho ** 2 + rp ** 2)
        return ui, uo, dnu

    def jump(self, theta):
        ui, uo, _ = self.membrane_traces(theta)
        return uo - ui

    def boundary_spectrum(self) -> ModeSpectrum:
        """Trace on ``r = 1``."""
        N = np.abs(self.modes)
        return ModeSpectrum(2 * self.b * self.geometry.R ** N)


def perturbed_transmission_solve(g_hat: ModeSpectrum, geometry: CellGeometry, beta, K=32, n_theta=256):
    """Collocation solve of the transmission problem across ``r = R + eps h``.

    The Neumann data on ``r = 1`` are built into the annulus basis, so only
    the two membrane conditions are collocated.  Least squares over
    ``n_theta`` angles; the scaled system must have condition < 1e12.
    """
    if g_hat.band_limit > K:
        raise ValueError("applied field exceeds the mode band")
    if abs(g_hat[0]) > 0:
        raise ValueError("applied Neumann data must have zero mean")
    if n_theta < 2 * (2 * K + 1):
        raise ValueError("too few collocation angles for the mode band")
    R = geometry.R
    modes = np.arange(-K, K + 1)
    N = np.abs(modes)
    g = g_hat.rebanded(K).values
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    zero = PerturbedSolution(modes, np.zeros(modes.size, complex), np.zeros(modes.size, complex), g,
                             geometry, beta, 0.0, 1.0)
    rho, rp = zero.rho(theta), zero.rho_prime(theta)
    if np.any(rho <= 0) or np.any(rho >= 1):
        raise OracleError("perturbed membrane leaves the unit disk")
    E = np.exp(1j * np.outer(theta, modes))
    rr = rho[:, None]
    norm = np.sqrt(rho ** 2 + rp ** 2)[:, None]
    # inside columns
    vi = (rr / R) ** N * E
    ri = N / R * (rr / R) ** np.maximum(N - 1, 0) * E
    ti = 1j * modes * vi
    dni = (rr * ri - (rp[:, None] / rr) * ti) / norm
    # annulus columns (mode zero: constant fixed to zero mean on r = 1, so omitted)
    vo = ((R / rr) ** N + R ** (2 * N) * (rr / R) ** N) * E
    ro = N * (-(R / rr) ** N / rr + R ** (2 * N) * (rr / R) ** N / rr) * E
    to = 1j * modes * vo
    dno = (rr * ro - (rp[:, None] / rr) * to) / norm
    keep = N > 0
    vo, dno = vo[:, keep], dno[:, keep]
    # particular part from the Neumann data
    pv, pr, pt = zero._fields(rho, theta, "out")
    pdn = (rho * pr - rp / rho * pt) / norm[:, 0]
    # rows: R (flux+ - flux-) = 0 ;  u+ - u- - beta flux- = 0
    top = np.hstack([-R * dni, R * dno])
    bot = np.hstack([-vi - beta * dni, vo])
    M = np.vstack([top, bot])
    rhs = -np.concatenate([R * pdn, pv])
    scale = np.linalg.norm(M, axis=0)
    scale[scale == 0] = 1.0
    Ms = M / scale
    cond = np.linalg.cond(Ms)
    if not cond < 1e12:
        raise OracleError(f"collocation system condition {cond:.3g} exceeds 1e12")
    x, *_ = np.linalg.lstsq(Ms, rhs, rcond=None)
    x = x / scale
    resid = float(np.linalg.norm(M @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
    a = x[:modes.size]
    b = np.zeros(modes.size, complex)
    b[keep] = x[modes.size:]
    return PerturbedSolution(modes, a, b, g, geometry, beta, resid, float(cond))


def shape_derivative_quotient(g_hat: ModeSpectrum, R, beta, eps, h_hat, K=32, n_theta=256) -> ModeSpectrum:
    """``(u_eps - u_0)/eps`` on ``r = 1`` from two collocation solves."""
    base = perturbed_transmission_solve(g_hat, CellGeometry(R), beta, K, n_theta).boundary_spectrum()
    pert = perturbed_transmission_solve(g_hat, CellGeometry(R, eps, h_hat), beta, K, n_theta).boundary_spectrum()
    return (pert - base).scaled(1.0 / eps)


# ------------------------------------------------------------------ intensity

def intensity_matrix_quadrature(sol: PerturbedSolution, n_max, k, ell, gamma, delta, n_theta=512):
    """``I^n(m)`` by trapezoidal quadrature over the (perturbed) membrane.

    ``I^n(m) = (gamma / (2 pi E_m)) int c(theta) J_n(ik rho) J_m(ik rho)
    e^{-i(n+m) theta} ds`` with ``c = delta [u]`` and the exact arc length.
    """
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    rho, rp = sol.rho(theta), sol.rho_prime(theta)
    ds = np.sqrt(rho ** 2 + rp ** 2)
    c = delta * sol.jump(theta)
    idx = np.arange(-n_max, n_max + 1)
    ik = 1j * k
    Phi = np.array([specfun.bessel_j(int(n), ik * rho) * np.exp(-1j * n * theta) for n in idx])
    E = np.array([source_gain(int(m), k, ell) for m in idx])
    w = c * ds * (2 * np.pi / n_theta)
    # entries[m, n] = sum_theta w Phi_m Phi_n
    mat = (Phi * w) @ Phi.T
    return gamma / (2 * np.pi) * mat / E[:, None]
