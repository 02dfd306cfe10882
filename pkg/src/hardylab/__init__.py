"""Numerical checks of sharp weighted Hardy inequalities on model manifolds."""

from hardylab.geometry import ModelSpace, s_K, density, laplacian_r
from hardylab.quadrature import QuadratureSpec, QuadratureResult, integrate_radial, h_tables
from hardylab.functionals import (
    HardyParams,
    sharp_constant,
    remainder_constant,
    hardy_quotient,
    improved_functional,
    log_hardy_quotient,
)

__version__ = "0.1.0"

__all__ = [
    "ModelSpace",
    "s_K",
    "density",
    "laplacian_r",
    "QuadratureSpec",
    "QuadratureResult",
    "integrate_radial",
    "h_tables",
    "HardyParams",
    "sharp_constant",
    "remainder_constant",
    "hardy_quotient",
    "improved_functional",
    "log_hardy_quotient",
]
