"""
ldg-layer: local discontinuous Galerkin on layer-adapted meshes

Solves -eps*Lap(u) + a.grad(u) + b*u = f on the unit square with u = 0 on the
boundary, on Shishkin, Bakhvalov-Shishkin and Bakhvalov-type meshes, and
measures the L2, energy and supercloseness errors of the computed solution.
"""

__version__ = "1.0.0"
