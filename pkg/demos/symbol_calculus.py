"""
Checking the discrete symbol calculus numerically
=================================================

Quantizing the kinetic symbol on a periodic lattice reproduces the assembled
kinetic matrix up to roundoff. Truncating the Moyal expansion after N terms
leaves an error of order eps^N, and the norm of a quantized bounded symbol
stays flat as eps shrinks.
"""

from latharm import builtin_model
from latharm.verify import psido_study

model = builtin_model("M1")
rep = psido_study(model, [0.2, 0.1, 0.05, 0.025])

# %%
print("quantization mismatch:")
for eps, v in rep.values("quantization"):
    print(f"  eps={eps:<6g} {v:.2e}")

# %%
for N in (1, 2, 3):
    vals = ", ".join(f"{v:.2e}" for _, v in rep.values("moyal", N))
    print(f"Moyal truncation N={N}: [{vals}]  slope {rep.slope('moyal', N):.3f}")

# %%
norms = [v for _, v in rep.values("calderon_vaillancourt")]
print("quantized cos(x) sin(xi) norms:", ", ".join(f"{v:.4f}" for v in norms))
print(f"max/min ratio {max(norms) / min(norms):.4f}")
