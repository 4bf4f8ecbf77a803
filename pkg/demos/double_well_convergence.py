"""
Double well on a 1D lattice: eigenvalues against oscillator levels
==================================================================

Builds the built-in double-well model M1, diagonalizes H_eps for a sweep
of lattice spacings and compares E_k / eps with the merged oscillator
levels of the two wells.

Run with ``python demos/double_well_convergence.py``.
"""

import numpy as np

from latharm import builtin_model, convergence_study, merged_levels

model = builtin_model("M1")

# The two wells sit at x = -1 and x = 1 and are mirror images, so every
# oscillator level appears twice.
levels = merged_levels(model, 4)
for lv in levels:
    print(f"level {lv.rank}: {lv.value:.6f}  (well {lv.well}, alpha {lv.alpha})")

# %%
# Halving eps four times. A box of half-width 3 leaves ample room for the
# Gaussian tails around both wells.
eps = [0.04, 0.02, 0.01, 0.005]
rep = convergence_study(model, 4, eps, 3.0)

print("\n  eps      k   E_k/eps     e_k       |E_k - eps e_k|")
for e, k, E, pred, err in rep.rows:
    print(f"  {e:<7g}  {k}   {E / e:.6f}  {pred / e:.6f}  {err:.3e}")

# %%
# On a log-log scale the absolute error is a straight line; its slope is
# the measured convergence order.
for k in range(1, 5):
    print(f"k={k}: slope {rep.slope(k):.3f}")

worst = np.max(rep.scaled_errors(0.005))
print(f"\nlargest |E_k/eps - e_k| at eps=0.005: {worst:.4f}")
