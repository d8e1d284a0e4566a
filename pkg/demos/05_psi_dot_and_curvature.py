"""
Why max psi_dot can rise early in the flow
==========================================

With ``psi = phi + 3 t log Z`` one has ``psi_dot = log(omega^2 / ghat^2)``,
which vanishes at ``t = 0`` for zero data.  Differentiating once more at
``t = 0`` gives ``d psi_dot / dt = -R``, where ``R = 2 + 3 Laplacian(log Z)`` is
the Chern scalar curvature of ghat.  Wherever ``R < 0`` the quantity climbs
before the volume collapse pulls it back down.
"""

# %%
import numpy as np

from hopfflow.flow import FlowControl, GridSpec, InitialData, ReducedFlow, run_flow
from hopfflow.geometry import make_moduli

for ab in [(2, 4), (1.5, 3)]:
    m = make_moduli(*ab)
    grid = GridSpec.for_moduli(m, 32, 32)
    op = ReducedFlow(m, grid)
    logZ = np.broadcast_to(np.log(op.Z), grid.shape).copy()
    # tr_ghat(i ddbar log Z), with the frame Hessian of the discrete operator
    H = op.frame_hessian(logZ)
    g11, g12, g22 = op.ghat
    det = g11 * g22 - g12 ** 2
    lap = (g22 * H[0] - 2 * g12 * H[1] + g11 * H[2]) / det
    R = 2 + 3 * lap
    print(f"\n{ab}: min R = {R.min():+.4f} at sigma = {grid.sigma[np.argmin(R.min(axis=0))]:.3f}")

    res = run_flow(m, grid, InitialData("zero"), FlowControl(t_max=0.49, cfl=1.0, monitor_cadence=0.01))
    recs = res.records
    slope = (recs[1].max_psi_dot - recs[0].max_psi_dot) / (recs[1].t - recs[0].t)
    peak = max(recs, key=lambda r: r.max_psi_dot)
    print(f"  initial slope of max psi_dot = {slope:+.4f} (predicted {-R.min():+.4f})")
    print(f"  peak max psi_dot = {peak.max_psi_dot:.4f} at t = {peak.t:.2f}")
