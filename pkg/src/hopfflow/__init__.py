"""LCK metrics on primary Hopf surfaces and their Chern-Ricci flow.

Submodules
----------
geometry     moduli, the potential ``Phi`` and the reduced coordinates
tensors      closed-form metric tensors (``ghat``, ``Theta``, ``chi``, ...)
verify       finite-difference oracles and the identity suite
flow         the reduced parabolic Monge-Ampere flow
diagnostics  monitors recorded along a flow
config, cli  run configuration and the command-line front end
"""
__version__ = "0.1.0"

from .geometry import HopfModuli, ModuliError, make_moduli, solve_phi  # noqa: F401
