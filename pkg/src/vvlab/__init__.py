"""Numerical laboratory for a viscous 2x2 triangular hyperbolic system.

The lab integrates u_t + F(u)_x = eps * (B(u) u_x)_x for a triangular flux
F = (f(u1), g(u1, u2)) with a viscosity matrix B that shares the eigenvectors
of DF, computes traveling-wave-adapted gradient diagnostics from the
trajectories, and measures the Lyapunov-type functionals and interaction
integrals that control the small-viscosity limit.
"""

from vvlab.core import Field, FieldPair, Grid1D

__all__ = ["Grid1D", "Field", "FieldPair"]
__version__ = "0.1.0"
