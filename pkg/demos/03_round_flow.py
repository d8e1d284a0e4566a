"""
Flow on the round surface
=========================

From zero data on ``|alpha| = |beta|`` the potential stays spatially constant
and follows ``phi(t) = -(1 - 2t)(log(1 - 2t) - 1)/2 - 1/2``.  The metric is
``(1 - 2t)`` times the round one along the sphere directions, while the
``u``-circle keeps its length ``L / sqrt(2)``.
"""

# %%
import math

import numpy as np

from hopfflow.flow import FlowControl, GridSpec, InitialData, exact_round_potential, run_flow
from hopfflow.geometry import make_moduli

m = make_moduli(2, 2)
grid = GridSpec.for_moduli(m, 32, 32)
checks = []
res = run_flow(m, grid, InitialData("zero"),
               FlowControl(t_max=0.45, cfl=1.0, monitor_cadence=0.05,
                           snapshot_times=(0.1, 0.2, 0.3, 0.4, 0.45)),
               on_snapshot=lambda s: checks.append((s.t, np.ptp(s.phi), s.phi[0, 0])))

# %%
print(" t     phi            exact          spread")
for t, spread, val in checks:
    print(f"{t:4.2f}  {val:+.10f}  {exact_round_potential(t):+.10f}  {spread:.1e}")

# %%
print(f"\nloop length target L/sqrt(2) = {m.period_L / math.sqrt(2):.12f}")
for r in res.records[::3]:
    print(f"t = {r.t:4.2f}  loop = {r.loop_length_min:.12f}  tr_chi omega = {r.max_trace_chi_omega:.6f}")
