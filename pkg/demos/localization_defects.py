"""
How fast do the localization errors shrink?
===========================================

Splitting H_eps with a partition of unity whose pieces shrink like eps^0.4
costs an error operator. This script measures the operator norms of the
IMS remainder and of the microlocal replacement error for both the 1D
double well and the 2D anisotropic well.
"""

from latharm import builtin_model, localization_defects

# %%
# On the coarse sweep the cutoffs are only a few lattice sites wide, so the
# IMS remainder still follows its lattice-resolution regime. The finer
# sweep shows the rate steepening once the cutoff is resolved.
m1 = builtin_model("M1")
for eps in ([0.1, 0.05, 0.025], [0.025, 0.0125, 0.00625]):
    rep = localization_defects(m1, "ims", eps, half_width=3.0)
    norms = ", ".join(f"{v:.3e}" for _, v in rep.rows)
    print(f"M1 ims  eps={eps}: norms [{norms}] slope {rep.slope:.3f}")

# %%
# The microlocal error compares the kinetic operator with its frozen
# quadratic model after cutting off in both position and momentum.
rep = localization_defects(m1, "microlocal", [0.1, 0.05, 0.025])
print(f"M1 microlocal: slope {rep.slope:.3f}")

m2 = builtin_model("M2")
rep = localization_defects(m2, "microlocal", [0.2, 0.1, 0.05], half_width=1.5)
print(f"M2 microlocal: slope {rep.slope:.3f}")
