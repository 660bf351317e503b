import numpy as np
import pytest

from tomo import cellfield as cf
from tomo import oracles as orc
from tomo.model import CellGeometry, ModeSpectrum, hermitian_spectrum

R, BETA, DELTA = 0.05, 0.1, 0.91e-6
H2 = hermitian_spectrum([(2, 0.5)])  # cos(2 theta)


def rel(a, b):
    return abs(a - b) / abs(b)


def state(z=1, conv="derived", R=R, g_hat=None):
    return cf.electro_state(z, CellGeometry(R), BETA, DELTA, g_hat=g_hat, convention=conv)


def test_selection_and_limits():
    f0 = cf.boundary_potential_spectrum(2, R, BETA)
    assert f0.support() == [2] and f0[0] == 0
    tiny = cf.boundary_potential_spectrum(3, R, 1e-12)[3]
    assert tiny == pytest.approx(1 / 3, rel=1e-9)
    H = cf.harmonic_part_spectrum(2, 1e-4, BETA)[2]
    assert H == pytest.approx(1e-8 / 2, rel=1e-5)
    with pytest.raises(ValueError):
        cf.boundary_potential_spectrum(0, R, BETA)


def test_spectra_against_transmission_oracle():
    # frozen from the radial FD transmission solve, n_r = 2048
    ref = {"f0": 1.0025039323395397, "H": 0.05006262164761829, "c": 4.555698569929121e-08}
    s = state()
    assert rel(s.f0_hat[1], ref["f0"]) <= 1e-3
    assert rel(s.H_hat[1], ref["H"]) <= 1e-3
    assert rel(s.c_hat[1], ref["c"]) <= 1e-3


def test_legacy_exponent_is_off_by_one_power():
    """The legacy ``R^(2N-2)`` drifts from the transmission solve by a few percent at z = 1."""
    t = orc.radial_transmission_solve(R, BETA, ModeSpectrum.delta(1), n_r=1024)
    legacy = cf.boundary_potential_spectrum(1, R, BETA, convention="legacy")[1]
    derived = cf.boundary_potential_spectrum(1, R, BETA)[1]
    assert rel(derived, t.outer[1]) < 1e-4
    assert 0.04 < rel(legacy, t.outer[1]) < 0.06
    # the legacy closed form itself
    N, D = 1, 2 * (1 + BETA / (2 * R))
    assert legacy == pytest.approx((D + BETA * N * R ** 0) / (D - BETA * N * R ** 0), rel=1e-14)


def test_psi_and_concentration():
    H = ModeSpectrum({2: 0.3, -2: 0.3})
    psi = cf.psi_spectrum(H, R, BETA)
    assert psi[2] == pytest.approx(-BETA * (2 / R) / (1 + BETA * 2 / (2 * R)) * 0.3)
    assert cf.psi_spectrum(H, R, 1e9)[2] == pytest.approx(-2 * 0.3, rel=1e-6)
    assert not np.any(cf.psi_spectrum(ModeSpectrum.zeros(2), R, BETA).values)
    s = state()
    assert s.c_hat.allclose(s.Psi_hat.scaled(-DELTA))
    assert s.Psi_hat[0] == 0


def test_real_applied_field_gives_symmetric_spectra():
    g = hermitian_spectrum([(2, 0.5)])
    s = cf.electro_state(None, CellGeometry(R), BETA, DELTA, g_hat=g)
    for spec in (s.f0_hat, s.H_hat, s.Psi_hat, s.c_hat, cf.w_spectrum(s, H2)):
        v = spec.values
        assert np.allclose(v, np.conj(v[::-1]), rtol=0, atol=1e-14 * np.abs(v).max())


def test_w_zero_and_constant_perturbation():
    s = state()
    assert not np.any(cf.w_spectrum(s, ModeSpectrum.zeros(2)).values)
    w = cf.w_spectrum(s, ModeSpectrum({0: 1.0}))
    assert w.support(1e-300) == [1]


def test_w_supported_on_sidebands():
    w = cf.w_spectrum(state(), H2)
    assert sorted(w.support(1e-300)) == [-1, 3]


def test_w_against_fd_oracle():
    s = state()
    S, T = cf.jump_data(s, H2)
    t = orc.radial_transmission_solve(R, BETA, ModeSpectrum.zeros(0), n_r=1024, S_hat=S, T_hat=T)
    w = cf.w_spectrum(s, H2)
    for q in (-1, 3):
        assert rel(w[q], t.outer[q]) <= 1e-2
    jump = cf.w_solution(s, H2).jump()
    for q in (-1, 3):
        assert rel(jump[q], t.jump[q]) <= 1e-3
    assert jump[0] == 0 and t.jump[0] == 0


def test_w_against_difference_quotient():
    # frozen from (u_eps - u)/eps at eps = 1e-4, collocation band 32
    frozen = {-1: -0.06265624339185362, 3: 0.0001408014145119202}
    w = cf.w_spectrum(state(), H2)
    for q, v in frozen.items():
        assert rel(w[q], v) <= 1e-3


def test_jump_closed_form_matches_solve():
    s = state(2)
    h = hermitian_spectrum([(1, 0.2 - 0.1j), (3, 0.4)])
    sol = cf.w_solution(s, h)
    kappa = cf.jump_gain(sol.modes, R, BETA)
    rebuilt = kappa * sol.boundary().values + cf.jump_remainder(s, h).values
    assert np.allclose(sol.jump().values, rebuilt, rtol=1e-10, atol=1e-16)


def test_psi1_trivial_and_sum_collapse():
    s = state()
    zero = cf.psi1_spectrum(s, ModeSpectrum.zeros(2), ModeSpectrum.zeros(2))
    assert not np.any(zero.values)
    # single-mode field: the convolution picks p = n - z only
    h = ModeSpectrum({2: 1.0})
    p1 = cf.psi1_spectrum(s, h, ModeSpectrum.zeros(3), convention="legacy")
    assert p1.support(1e-300) == [3]


def test_psi1_against_membrane_jump_quotient():
    # frozen from -([u_eps] - [u])/eps sampled on the perturbed membrane, eps = 1e-4
    frozen = {-1: 0.7525019532594975, 3: -0.6257806461295309}
    s = state()
    w = cf.w_spectrum(s, H2)
    p1 = cf.psi1_spectrum(s, H2, w)
    for q, v in frozen.items():
        assert rel(p1[q], v) <= 1e-3


def test_legacy_psi1_disagrees_with_quotient():
    s = state(conv="legacy")
    w = cf.w_spectrum(state(), H2)
    p1 = cf.psi1_spectrum(s, H2, w)
    assert rel(p1[3], -0.6257806461295309) > 0.5


def test_first_order_consistency():
    """``||(u_eps - u)/eps - w||`` halves with ``eps`` on the modes that carry an O(eps) error."""
    g = ModeSpectrum.delta(1)
    w = cf.w_spectrum(state(), H2).rebanded(32)
    errs = [np.linalg.norm((orc.shape_derivative_quotient(g, R, BETA, e, H2) - w).values)
            for e in (1e-3, 5e-4)]
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)
