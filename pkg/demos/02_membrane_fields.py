"""
Potential across a leaky membrane
=================================

An applied field ``cos(z theta)`` on the outer boundary sets up a
potential that jumps across the cell membrane.  The fluorescent dye
responds to that jump.  Bending the membrane to ``R + eps h`` changes
the boundary voltage by ``eps w``, which we check against two
collocation solves.
"""

import numpy as np

from tomo import cellfield, oracles
from tomo.model import CellGeometry, ModeSpectrum, hermitian_spectrum

R, beta, delta = 0.05, 0.1, 0.91e-6
state = cellfield.electro_state(1, CellGeometry(R), beta, delta)
print(f"boundary potential f0(1) = {state.f0_hat[1]:.6f}")
print(f"harmonic part     H(1)  = {state.H_hat[1]:.6e}")
print(f"dye response      c(1)  = {state.c_hat[1]:.6e}")

# a two-lobed bulge couples mode 1 to modes -1 and 3
h = hermitian_spectrum([(2, 0.5)])
w = cellfield.w_spectrum(state, h)
quotient = oracles.shape_derivative_quotient(ModeSpectrum.delta(1), R, beta, 1e-4, h)
for q in (-1, 3):
    print(f"w({q:+d}) = {w[q].real:+.6e}   (u_eps - u)/eps = {quotient[q].real:+.6e}")

psi1 = cellfield.psi1_spectrum(state, h, w)
print("first-order density:", {q: np.round(psi1[q].real, 6) for q in psi1.support(1e-12)})
