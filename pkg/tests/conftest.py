"""Shared fixtures and serial oracles for the test suite."""

import numpy as np
import pytest

from blockgp import spawn


@pytest.fixture
def cluster_factory():
    """Spawn clusters that are shut down when the test ends."""
    opened = []

    def make(P, backend="in-process", seed=0, **kwargs):
        cl = spawn(P, backend=backend, seed=seed, **kwargs)
        opened.append(cl)
        return cl

    yield make
    for cl in opened:
        cl.shutdown()


def spd_matrix(n, seed=0):
    """Well-conditioned random SPD test matrix A = B B^T + n I."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def exp_cov(coords, sigma2, rho, tau2=0.0):
    """Dense exponential-kernel covariance (Matern nu=1/2) with nugget."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    return sigma2 * np.exp(-d / rho) + tau2 * np.eye(len(coords))


def relerr(got, want):
    want = np.asarray(want, dtype=float)
    scale = np.linalg.norm(want)
    return np.linalg.norm(np.asarray(got) - want) / (scale if scale else 1.0)
