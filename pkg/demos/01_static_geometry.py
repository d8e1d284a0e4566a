"""
The potential Phi and the metrics it generates
==============================================

A class-1 primary Hopf surface is fixed by two moduli ``1 < |alpha| <= |beta|``.
Everything below depends on those two numbers only.
"""

# %%
# Moduli and the period of the reduced coordinate ``u = log Phi``.
import numpy as np

from hopfflow.geometry import make_moduli, reduced_from_ambient, solve_phi, z_function
from hopfflow.tensors import (hat_metric, hermitian_det, phi_hessian, reference_metric,
                              theta_form, trace_pair)

m = make_moduli(2, 4)
print(f"k1 = {m.k1:.6f}, k2 = {m.k2:.6f}, L = {m.period_L:.7f}")

# %%
# At ``z = (1, 1)`` the defining relation reduces to ``y + y^2 = 1`` with
# ``y = Phi^(-2/3)``, so Phi is a power of the golden ratio.
p = np.array([1.0, 1.0])
golden = (np.sqrt(5) - 1) / 2
phi, Z = solve_phi(m, p), z_function(m, p)
print(f"Phi(1,1) = {phi:.10f}  (golden^-1.5 = {golden ** -1.5:.10f})")
print(f"Z(1,1)   = {Z:.10f}")
print("reduced coordinates:", reduced_from_ambient(m, p))

# %%
# The hat metric, its determinant identity and the trace of Theta.
g = hat_metric(m, p)
print("ghat =\n", np.round(g.real, 8))
print(f"det ghat * Phi^2 * Z^3 = {hermitian_det(g) * phi ** 2 * Z ** 3:.15f}")
print(f"tr_ghat Theta          = {trace_pair(g, theta_form(m, p)):.15f}")

# %%
# Reference metrics interpolate linearly between ghat and Theta; Theta has
# rank one, so the determinant falls linearly to zero at ``t = 1/2``.
for t in (0.0, 0.25, 0.4, 0.49):
    d = hermitian_det(reference_metric(m, t, p))
    print(f"t = {t:<5} det omega_t = {d:.12f}   (1 - 2t) det ghat = {(1 - 2 * t) * hermitian_det(g):.12f}")

# %%
# On the round surface ``Phi = |z|^2`` and its complex Hessian is the identity.
# The variant with unsquared exponents adds a rank-one term instead.
r = make_moduli(2, 2)
q = np.array([0.6 + 0.2j, -1.1j])
print("corrected Hessian:\n", np.round(phi_hessian(r, q), 12))
print("unsquared variant:\n", np.round(phi_hessian(r, q, variant="printed"), 6))
