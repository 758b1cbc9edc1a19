"""Null geodesics of the conformally rescaled Schwarzschild string geometry.

Modules: special_functions (Lambert W, Weierstrass p, period lattices),
chart_atlas (charts, Hamiltonians, transition maps), geodesic_flow
(integration through horizon, scri and r = 0), elliptic_analysis (the
elliptic and genus-two curves of a geodesic) and cli.
"""
__version__ = "0.1.0"
