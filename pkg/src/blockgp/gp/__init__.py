"""Gaussian process regression on top of the distributed kernels."""

from .kernels import (BUILTIN_KERNELS, matern_correlation, sqexp_correlation)
from .problem import CovarianceSpec, KrigeProblem, OptResult, builtin_spec

__all__ = ["BUILTIN_KERNELS", "CovarianceSpec", "KrigeProblem", "OptResult",
           "builtin_spec", "matern_correlation", "sqexp_correlation"]
