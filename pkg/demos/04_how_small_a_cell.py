"""
How small a cell can we resolve?
================================

Mode ``p`` is recoverable when ``1/SNR`` stays below its diagonal weight
``F_p(R)``.  For small ``|k|R`` that weight is a power of the radius, so
the minimal radius falls like a power of the SNR.  With the default
optics the weights are tiny, so we scan SNRs far beyond laboratory
values to see the curves at all.
"""

import numpy as np

from tomo import resolution
from tomo.model import default_context

ctx = default_context()
for R in (0.01, 0.05, 0.1):
    row = "  ".join(f"F_{p}={resolution.F_p(p, R, ctx):.2e}" for p in range(4))
    print(f"R = {R * 1e3:5.0f} um: {row}")

print("\nminimal radius (um)")
print(f"{'SNR':>8} " + " ".join(f"{'p=' + str(p):>10}" for p in range(4)))
for snr, *radii in resolution.rstar_table(np.geomspace(1e30, 1e45, 6), ctx):
    print(f"{snr:8.0e} " + " ".join(f"{r:10.3f}" for r in radii))

print("\nmaximal mode number at SNR = 1e38")
for R, n in resolution.maxmode_table(np.linspace(0.01, 0.1, 10), [1e38], ctx):
    print(f"  R = {R:5.0f} um -> {n}")
