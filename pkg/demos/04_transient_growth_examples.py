"""
Transient growth in stable linear maps
======================================

Two matrices with the same eigenvalues can behave very differently over a
few steps. The Kreiss constant measures the worst case; here it is compared
with the actual peak of ||A^k|| for a normal and a non-normal example.
"""

import numpy as np

from salsa_rl.stability import eigenvalues, kreiss_constant

normal = np.diag([0.9, 0.9])
jordan = np.array([[0.9, 10.0], [0.0, 0.9]])

for name, a in [("normal", normal), ("Jordan-type", jordan)]:
    powers = [np.linalg.norm(np.linalg.matrix_power(a, k), 2) for k in range(60)]
    print("%-12s eigenvalues %s  peak ||A^k|| = %7.2f at k=%2d  Kreiss constant = %.3f"
          % (name, np.round(eigenvalues(a), 3), max(powers), int(np.argmax(powers)), kreiss_constant(a)))

# %%
# The Kreiss matrix theorem brackets the peak: K <= sup_k ||A^k|| <= e n K.
# Finer grids can only raise the estimate.
for level in range(3):
    print("grid level %d: %.6f" % (level, kreiss_constant(jordan, level=level, refine=False)))
