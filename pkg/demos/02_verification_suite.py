"""
Checking the closed forms against finite differences
====================================================

Each identity is measured at seeded random points and at points on the
coordinate axes.  Derivative formulas are compared with central differences of
the numerically solved potential; the observed order comes from halving h.
"""

# %%
from hopfflow.geometry import make_moduli
from hopfflow.verify import PRESETS, run_suite

for name, ab in PRESETS.items():
    print(f"\n== {name}: (|alpha|, |beta|) = {ab}")
    for r in run_suite(make_moduli(*ab), samples=1000, fd_samples=100, seed=42):
        flag = "ok  " if r.passed else "FAIL"
        print(f"  {flag} {r.name:<28} {r.max_residual:9.2e}  (tol {r.tolerance:.0e})  {r.notes}")

# %%
# The suite with the unsquared Hessian: the determinant identity and the
# derivative check both break by order-one amounts.
bad = run_suite(make_moduli(2, 2), samples=200, fd_samples=20, variant="printed")
print("\nunsquared variant fails:", [r.name for r in bad if not r.passed])
