"""Covariance kernels and the built-in entrywise generators.

Matern smoothness is restricted to the half-integer values 1/2, 3/2, 5/2,
which have closed forms; distances are scaled by sqrt(2*nu)/rho so that
nu = 1/2 reduces to exp(-d/rho).
"""

import numpy as np

from .. import registry
from ..errors import UnsupportedSmoothness

HALF_INTEGER_NU = (0.5, 1.5, 2.5)


def matern_correlation(d, rho, nu):
    """Half-integer Matern correlation of a distance (array); in (0, 1]."""
    d = np.asarray(d, dtype=float)
    if rho <= 0:
        raise ValueError(f"range must be positive, got {rho}")
    s = np.sqrt(2.0 * nu) * d / rho
    if nu == 0.5:
        return np.exp(-s)
    if nu == 1.5:
        return (1.0 + s) * np.exp(-s)
    if nu == 2.5:
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    raise UnsupportedSmoothness(
        f"nu={nu} not supported; use one of {HALF_INTEGER_NU}")


def sqexp_correlation(d, rho):
    d = np.asarray(d, dtype=float)
    return np.exp(-0.5 * (d / rho) ** 2)


def _points(inputs, key):
    pts = np.asarray(inputs[key], dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _dist(inputs, left_key, right_key, i, j):
    X = _points(inputs, left_key)
    Y = _points(inputs, right_key)
    diff = X[i - 1] - Y[j - 1]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _zero_mean(params, inputs, i):
    return np.zeros(len(i))


registry.register("gen.zero", _zero_mean)


@registry.register("gen.delta")
def _delta(params, inputs, i, j):
    """Kronecker delta; collected triangular equals the identity."""
    return (i == j).astype(float)


@registry.register("gen.linear_index")
def _linear_index(params, inputs, i, j):
    """i + n*(j-1); handy construction oracle."""
    return i + inputs["n"] * (j - 1.0)


def _make_pairwise(kernel_id, corr):
    """Register cov/cross/pred generators for a stationary kernel.

    corr(params, inputs, d) -> correlation; theta[0] is the marginal variance
    and, when the kernel id ends in "-nugget", theta[-1] is the nugget added
    to the observation covariance diagonal only.
    """
    nugget = kernel_id.endswith("-nugget")

    def cov(params, inputs, i, j):
        k = params[0] * corr(params, inputs,
                             _dist(inputs, "coords", "coords", i, j))
        if nugget:
            k = k + params[-1] * (i == j)
        return k

    def cross(params, inputs, i, j):
        return params[0] * corr(params, inputs,
                                _dist(inputs, "coords", "pred_coords", i, j))

    def pred(params, inputs, i, j):
        return params[0] * corr(params, inputs,
                                _dist(inputs, "pred_coords", "pred_coords", i, j))

    def pred_var(params, inputs, i):
        return np.full(len(i), params[0])

    registry.register(f"gen.{kernel_id}.cov", cov)
    registry.register(f"gen.{kernel_id}.cross", cross)
    registry.register(f"gen.{kernel_id}.pred", pred)
    registry.register(f"gen.{kernel_id}.predvar", pred_var)


def _sqexp_corr(params, inputs, d):
    return sqexp_correlation(d, params[1])


def _matern_corr(params, inputs, d):
    return matern_correlation(d, params[1], inputs.get("nu", 0.5))


_make_pairwise("sqexp", _sqexp_corr)               # theta = (sigma2, rho)
_make_pairwise("matern", _matern_corr)             # theta = (sigma2, rho)
_make_pairwise("matern-nugget", _matern_corr)      # theta = (sigma2, rho, tau2)


def _product_corr(params, inputs, X, Y, i, j):
    d1 = np.abs(X[i - 1, 0] - Y[j - 1, 0])
    d2 = np.abs(X[i - 1, 1] - Y[j - 1, 1])
    return (matern_correlation(d1, params[1], inputs.get("nu1", 0.5)) *
            matern_correlation(d2, params[2], inputs.get("nu2", 0.5)))


def _register_product():
    """matern-product-nugget: theta = (sigma2, rho1, rho2, tau2), 2-D coords;
    correlation is a product of one Matern per coordinate axis."""

    def cov(params, inputs, i, j):
        X = _points(inputs, "coords")
        k = params[0] * _product_corr(params, inputs, X, X, i, j)
        return k + params[3] * (i == j)

    def cross(params, inputs, i, j):
        return params[0] * _product_corr(params, inputs,
                                         _points(inputs, "coords"),
                                         _points(inputs, "pred_coords"), i, j)

    def pred(params, inputs, i, j):
        Y = _points(inputs, "pred_coords")
        return params[0] * _product_corr(params, inputs, Y, Y, i, j)

    def pred_var(params, inputs, i):
        return np.full(len(i), params[0])

    registry.register("gen.matern-product-nugget.cov", cov)
    registry.register("gen.matern-product-nugget.cross", cross)
    registry.register("gen.matern-product-nugget.pred", pred)
    registry.register("gen.matern-product-nugget.predvar", pred_var)


_register_product()


def _register_white():
    """white: theta = (sigma2,); pure noise, zero cross-covariance."""

    def cov(params, inputs, i, j):
        return params[0] * (i == j)

    def cross(params, inputs, i, j):
        return np.zeros(len(i))

    def pred(params, inputs, i, j):
        return params[0] * (i == j)

    def pred_var(params, inputs, i):
        return np.full(len(i), params[0])

    registry.register("gen.white.cov", cov)
    registry.register("gen.white.cross", cross)
    registry.register("gen.white.pred", pred)
    registry.register("gen.white.predvar", pred_var)


_register_white()

BUILTIN_KERNELS = {
    "sqexp": 2,
    "matern": 2,
    "matern-nugget": 3,
    "matern-product-nugget": 4,
    "white": 1,
}
