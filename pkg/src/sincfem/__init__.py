"""Sampling Gaussian random fields from the fractional SPDE (kappa^2 - Laplace)^beta u = W
on the unit cube with finite elements and sinc quadrature."""

__version__ = "0.1.0"

from .fem import FemMatrices, Mesh, assemble, build_mesh, l2_error_norm
from .quadrature import QuadratureGrid, apply_Q, build_grid, calibrate_k, dense_frac_inverse
from .sampler import FieldSample, build_noise_factor, sample_load, sample_solution
from .spectral import analytic_solution_sqnorm, sample_overkill

__all__ = [
    "FemMatrices", "Mesh", "assemble", "build_mesh", "l2_error_norm",
    "QuadratureGrid", "apply_Q", "build_grid", "calibrate_k", "dense_frac_inverse",
    "FieldSample", "build_noise_factor", "sample_load", "sample_solution",
    "analytic_solution_sqnorm", "sample_overkill",
]
