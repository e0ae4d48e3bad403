"""Numerical pipeline for asymptotic profiles of quasilinear wave equations.

Modules: ``model`` (coefficients), ``reduced`` (reduced system), ``admissibility``,
``optical`` (approximate optical function), ``profile`` (u_app and residuals),
``energy`` (weights, energies, Poincare ratios), ``backward_solver`` and ``cli``.
"""
__version__ = "0.1.0"
