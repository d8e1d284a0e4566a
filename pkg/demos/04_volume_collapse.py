"""
Volume collapse on a non-round surface
======================================

On ``(|alpha|, |beta|) = (2, 4)`` the volume shrinks exactly like ``1 - 2t``
while ``tr_chi omega`` stays bounded up to the extinction time.  The spread of
``u``-circle lengths over ``sigma`` is reported as evidence about the
collapsed limit; nothing here asserts what that limit is.
"""

# %%
from hopfflow.diagnostics import closed_form_volume
from hopfflow.flow import FlowControl, GridSpec, InitialData, run_flow
from hopfflow.geometry import make_moduli

m = make_moduli(2, 4)
print(f"closed-form volume of ghat: {closed_form_volume(m):.6f}")

for n in (32, 64):
    res = run_flow(m, GridSpec.for_moduli(m, n, n), InitialData("zero"),
                   FlowControl(t_max=0.49, cfl=1.0, monitor_cadence=0.07))
    v0 = res.records[0].volume
    print(f"\n{n} x {n}: Vol(0) = {v0:.6f}, {res.steps} steps")
    print("  t     Vol/Vol0 - (1-2t)   max tr_chi omega   loop min / max")
    for r in res.records:
        print(f"  {r.t:4.2f}  {r.volume / v0 - (1 - 2 * r.t):+.3e}         {r.max_trace_chi_omega:8.4f}"
              f"         {r.loop_length_min:.4f} / {r.loop_length_max:.4f}")
