"""The kriging engine: likelihood, MLE, prediction, and simulation.

A KrigeProblem keeps only metadata and collected small results on the master;
mean vectors, covariance matrices, Cholesky factors, and solved systems stay
distributed under a per-problem name prefix.  Every derived distributed
object carries a freshness fingerprint of the parameter vector, so repeated
calls at unchanged parameters issue no distributed work at all.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .. import distla
from ..errors import DimensionMismatch, NonFiniteObjective, NotPositiveDefinite
from .kernels import BUILTIN_KERNELS

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class CovarianceSpec:
    """Declarative mean/covariance description for one problem.

    All five generators are registry ids sharing one theta layout; `inputs`
    is pushed to the workers once and handed to every generator call.
    `pred_var_fn` (diag of the prediction covariance, as a vector generator)
    is optional; without it the full prediction covariance is built when
    standard errors are requested.
    """

    cov_fn: str
    cross_cov_fn: str
    pred_cov_fn: str
    mean_fn: str = "gen.zero"
    pred_mean_fn: str = "gen.zero"
    pred_var_fn: str = None
    inputs: dict = field(default_factory=dict)
    n_params: int = 1


def builtin_spec(kernel, coords, pred_coords=None, **kernel_inputs):
    """CovarianceSpec for a built-in kernel id (see BUILTIN_KERNELS)."""
    if kernel not in BUILTIN_KERNELS:
        raise DimensionMismatch(
            f"unknown kernel {kernel!r}; built-ins: {sorted(BUILTIN_KERNELS)}")
    inputs = {"coords": np.asarray(coords, dtype=float)}
    if pred_coords is not None:
        inputs["pred_coords"] = np.asarray(pred_coords, dtype=float)
    inputs.update(kernel_inputs)
    return CovarianceSpec(
        cov_fn=f"gen.{kernel}.cov",
        cross_cov_fn=f"gen.{kernel}.cross",
        pred_cov_fn=f"gen.{kernel}.pred",
        pred_var_fn=f"gen.{kernel}.predvar",
        inputs=inputs,
        n_params=BUILTIN_KERNELS[kernel])


@dataclass
class OptResult:
    theta: np.ndarray
    log_density: float
    trace: list            # list of (theta, log density) in evaluation order
    converged: bool
    n_evals: int


class KrigeProblem:
    """Master-side metadata and drivers for one GP regression problem."""

    def __init__(self, cluster, name, spec, y, theta0, m=0,
                 h_n=None, h_m=None, h_r=None):
        self.cluster = cluster
        self.name = name
        self.spec = spec
        self.y = np.asarray(y, dtype=float)
        self.n = len(self.y)
        self.m = int(m)
        self.theta = self._check_theta(theta0)
        self.h_r = h_r
        grid = cluster.grid
        self.row_layout = distla.make_layout(self.n, grid, h_n)
        self.col_layout = (distla.make_layout(self.m, grid, h_m)
                           if self.m > 0 else None)
        cluster.push(self._nm("inputs"), spec.inputs)
        self._y = distla.distribute(cluster, self._nm("y"), self.y, "vector",
                                    self.row_layout)
        self._fresh = {}
        self._scalars = {}
        self._handles = {}

    # -- plumbing --------------------------------------------------------
    def _nm(self, suffix):
        return f"{self.name}.{suffix}"

    def _check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.spec.n_params,):
            raise DimensionMismatch(
                f"theta has {theta.shape} entries; kernel expects "
                f"{self.spec.n_params}")
        if np.any(theta <= 0) or not np.all(np.isfinite(theta)):
            raise DimensionMismatch("theta entries must be finite and positive")
        return theta

    def _fp(self, theta):
        return theta.tobytes()

    def _is_fresh(self, key, fp):
        return self._fresh.get(key) == fp

    # -- derived distributed objects, freshness-guarded -------------------
    def _ensure_chol(self, theta):
        fp = self._fp(theta)
        if self._is_fresh("L", fp):
            return
        cov = distla.construct_distributed(
            self.cluster, self._nm("C"), "triangular", self.spec.cov_fn,
            theta, inputs_name=self._nm("inputs"), row_layout=self.row_layout)
        mu = distla.construct_distributed(
            self.cluster, self._nm("mu"), "vector", self.spec.mean_fn,
            theta, inputs_name=self._nm("inputs"), row_layout=self.row_layout)
        L, stats = distla.distributed_cholesky(self.cluster, cov, self._nm("L"))
        self.last_cholesky_stats = stats
        self.cluster.remote_apply("sub", [self._y.name, mu.name],
                                  self._nm("resid"))
        resid = distla.DistVector(self._nm("resid"), self.row_layout)
        u = distla.triangular_solve(self.cluster, L, resid, self._nm("u"),
                                    side="forward")
        self._handles.update({"L": L, "u": u, "mu": mu})
        self._scalars[fp] = {
            "logdet": distla.log_det_from_chol(self.cluster, L),
            "ssq": distla.sum_squares(self.cluster, u),
        }
        for key in ("L", "u", "mu"):
            self._fresh[key] = fp

    def _ensure_prediction_basis(self, theta):
        """V = L^{-1} C_cross and the predicted mean, fresh for theta."""
        if self.m <= 0:
            raise DimensionMismatch("problem has no prediction points")
        fp = self._fp(theta)
        self._ensure_chol(theta)
        if self._is_fresh("V", fp):
            return
        cross = distla.construct_distributed(
            self.cluster, self._nm("Cx"), "rectangular", self.spec.cross_cov_fn,
            theta, inputs_name=self._nm("inputs"),
            row_layout=self.row_layout, col_layout=self.col_layout)
        V = distla.triangular_solve(self.cluster, self._handles["L"], cross,
                                    self._nm("V"), side="forward")
        mu_pred = distla.construct_distributed(
            self.cluster, self._nm("mu_pred"), "vector", self.spec.pred_mean_fn,
            theta, inputs_name=self._nm("inputs"), row_layout=self.col_layout)
        w = distla.crossprod_mat_vec(self.cluster, V, self._handles["u"],
                                     self._nm("w"))
        self._handles.update({"V": V, "mu_pred": mu_pred, "w": w})
        sc = self._scalars[fp]
        sc["pred_mean"] = (distla.collect(self.cluster, mu_pred)
                           + distla.collect(self.cluster, w))
        self._fresh["V"] = fp

    # -- public API --------------------------------------------------------
    def log_density(self, theta=None):
        """Gaussian log likelihood at theta (defaults to the current vector)."""
        theta = self.theta if theta is None else self._check_theta(theta)
        fp = self._fp(theta)
        cached = self._scalars.get(fp)
        if cached is not None and "ll" in cached:
            self.theta = theta
            return cached["ll"]
        self._ensure_chol(theta)
        sc = self._scalars[fp]
        sc["ll"] = (-0.5 * self.n * LOG_2PI - 0.5 * sc["logdet"]
                    - 0.5 * sc["ssq"])
        self.theta = theta
        return sc["ll"]

    def optimize_log_dens(self, theta0=None, max_evals=500, xatol=1e-6):
        """Maximize the log density with Nelder-Mead on log-transformed theta.

        The log transform keeps every iterate in the positive orthant and
        makes the simplex-diameter stopping rule (`xatol`) relative in theta.
        Returns the best point found, flagged unconverged when the evaluation
        budget runs out; the trace records every evaluation.
        """
        theta0 = self.theta if theta0 is None else self._check_theta(theta0)
        trace = []

        def neg_ll(log_theta):
            theta = np.exp(log_theta)
            try:
                ll = self.log_density(theta)
            except NotPositiveDefinite:
                trace.append((theta, -np.inf))
                return np.inf
            trace.append((theta, ll))
            return -ll

        first = neg_ll(np.log(theta0))
        if not np.isfinite(first):
            raise NonFiniteObjective(
                f"log density not finite at starting theta {theta0}")
        res = minimize(neg_ll, np.log(theta0), method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": 1e-9,
                                "maxfev": max_evals, "adaptive": True})
        best_theta, best_ll = max(trace, key=lambda t: t[1])
        if not res.success:
            log.warning("optimizer budget exhausted after %d evaluations; "
                        "returning best-so-far", len(trace))
        self.theta = np.asarray(best_theta, dtype=float)
        return OptResult(theta=self.theta, log_density=best_ll, trace=trace,
                         converged=bool(res.success), n_evals=len(trace))

    def predict(self, se_fit=False):
        """Kriging means at the prediction points (and standard errors)."""
        self._ensure_prediction_basis(self.theta)
        sc = self._scalars[self._fp(self.theta)]
        mean = sc["pred_mean"].copy()
        if not se_fit:
            return mean
        if self.spec.pred_var_fn is not None:
            pv = distla.construct_distributed(
                self.cluster, self._nm("pv"), "vector", self.spec.pred_var_fn,
                self.theta, inputs_name=self._nm("inputs"),
                row_layout=self.col_layout)
            prior_var = distla.collect(self.cluster, pv)
        else:
            cp = self._construct_pred_cov(self.theta)
            prior_var = distla.collect_diagonal(self.cluster, cp)
        vtv = distla.crossprod_self_diag(self.cluster, self._handles["V"],
                                         self._nm("vtv_diag"))
        se2 = prior_var - distla.collect(self.cluster, vtv)
        if np.any(se2 < 0):
            warnings.warn("negative prediction variances clamped to zero "
                          "(round-off)", stacklevel=2)
            se2 = np.maximum(se2, 0.0)
        return mean, np.sqrt(se2)

    def _construct_pred_cov(self, theta):
        return distla.construct_distributed(
            self.cluster, self._nm("Cp"), "triangular", self.spec.pred_cov_fn,
            theta, inputs_name=self._nm("inputs"), row_layout=self.col_layout)

    def _posterior_cov_distributed(self, theta):
        """Sigma* = C_pred - V^T V as a distributed triangular matrix."""
        self._ensure_prediction_basis(theta)
        self._construct_pred_cov(theta)
        distla.crossprod_self(self.cluster, self._handles["V"],
                              self._nm("VtV"))
        self.cluster.remote_apply("sub", [self._nm("Cp"), self._nm("VtV")],
                                  self._nm("Sigma"))
        return distla.DistTriangular(self._nm("Sigma"), self.col_layout)

    def prediction_variance(self):
        """Full posterior covariance at the prediction points (dense, symmetric)."""
        sigma = self._posterior_cov_distributed(self.theta)
        lower = distla.collect(self.cluster, sigma)
        return lower + np.tril(lower, -1).T

    def simulate_realizations(self, r, post=True, zero_noise=False):
        """r realizations: rows are points, columns are draws.

        Unconditional draws are mu + L z; conditional draws are the posterior
        mean plus L_Sigma z with L_Sigma the Cholesky factor of the posterior
        covariance (no jitter is applied if that factorization fails).
        `zero_noise` suppresses z for exactness tests.
        """
        fill = "zeros" if zero_noise else "normal"
        grid = self.cluster.grid
        r_layout = distla.make_layout(int(r), grid, self.h_r)
        if not post:
            self._ensure_chol(self.theta)
            z = distla.construct_rnorm_distributed(
                self.cluster, self._nm("Z"), "rectangular",
                self.row_layout, r_layout, fill=fill)
            lz = distla.mult_chol(self.cluster, self._handles["L"], z,
                                  self._nm("LZ"))
            base = distla.collect(self.cluster, self._handles["mu"])
            return base[:, None] + distla.collect(self.cluster, lz)
        sigma = self._posterior_cov_distributed(self.theta)
        try:
            l_sigma, _ = distla.distributed_cholesky(self.cluster, sigma,
                                                     self._nm("LSigma"))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(
                exc.block_index,
                "posterior covariance not numerically PD") from exc
        z = distla.construct_rnorm_distributed(
            self.cluster, self._nm("Zp"), "rectangular",
            self.col_layout, r_layout, fill=fill)
        lz = distla.mult_chol(self.cluster, l_sigma, z, self._nm("LSZ"))
        sc = self._scalars[self._fp(self.theta)]
        return sc["pred_mean"][:, None] + distla.collect(self.cluster, lz)
