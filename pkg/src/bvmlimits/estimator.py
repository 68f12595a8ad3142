"""Estimator-style front end for the plug-in posterior approximation.

``PoissonBoundaryPosterior`` follows the fitted-density-model conventions
(``fit`` / ``sample`` / ``score_samples`` / ``get_params``) so the pipeline
composes with the wider ecosystem: rows of ``X`` are detector observations,
columns are pixels, ``y`` holds the observed counts.  ``fit`` runs the MAP
estimate and assembles the plug-in index sets and curvature; the fitted object
then samples parameter draws and scores parameter points under the
approximate posterior.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError
from .families import LogCoshMRFPrior, PowerLawPrior, grid_edges
from .limitdist import gamma_quantile
from .spect import (SpectGeometry, SpectInstance, map_estimate, plugin_approx,
                    plugin_logdensity, plugin_sample)


class PoissonBoundaryPosterior(BaseEstimator):
    """Approximate posterior for a nonnegative Poisson linear model.

    Parameters
    ----------
    exposure : float
        Observation time; counts are ``Poisson(exposure * X @ theta)``.
    prior : {"flat", "powerlaw", "logcosh"}
        Prior on the pixel intensities.  ``powerlaw`` uses ``alpha``;
        ``logcosh`` needs ``grid_shape`` for the pixel adjacency plus
        ``gamma`` and ``zeta``.
    alpha : float
        Power-law exponent (``1`` is flat).
    gamma, zeta : float
        Log cosh field hyperparameters.
    grid_shape : tuple of int, optional
        (rows, cols) of the pixel grid for the log cosh prior.
    tol, max_iter : float, int
        Mode-finding stopping rule.
    eps : float
        Score threshold for the nonregular set; 0 reproduces the raw
        classification, a positive value discards score-noise artifacts.

    Attributes
    ----------
    theta_hat_ : ndarray of shape (n_features,)
        Posterior mode.
    plugin_ : PluginApprox
        Index sets, curvature and rates at the mode.
    sigma_ : float
        Noise scale ``exposure ** -0.5``.
    """

    def __init__(self, exposure=1.0, prior="flat", alpha=1.0, gamma=25.0, zeta=8.0,
                 grid_shape=None, tol=1e-7, max_iter=5000, eps=0.0):
        self.exposure = exposure
        self.prior = prior
        self.alpha = alpha
        self.gamma = gamma
        self.zeta = zeta
        self.grid_shape = grid_shape
        self.tol = tol
        self.max_iter = max_iter
        self.eps = eps

    def _make_prior(self, p):
        if self.prior == "flat":
            return PowerLawPrior(np.ones(1))
        if self.prior == "powerlaw":
            return PowerLawPrior(np.asarray([self.alpha]))
        if self.prior == "logcosh":
            if self.grid_shape is None:
                raise DomainError("grid_shape is required for the logcosh prior")
            rows, cols = self.grid_shape
            if rows * cols != p:
                raise DomainError(f"grid_shape {self.grid_shape} does not match p = {p}")
            return LogCoshMRFPrior(grid_edges(rows, cols), gamma=self.gamma, zeta=self.zeta)
        raise DomainError(f"unknown prior {self.prior!r}")

    def fit(self, X, y):
        """Estimate the mode and the plug-in posterior from counts ``y``."""
        X = check_array(X, accept_sparse="csr")
        y = check_array(y, ensure_2d=False).ravel()
        if y.shape[0] != X.shape[0]:
            raise DomainError("X and y have inconsistent lengths")
        if np.any(y < 0):
            raise DomainError("counts must be nonnegative")
        self.n_features_in_ = X.shape[1]
        geom = SpectGeometry(rows=1, cols=X.shape[1], n_angles=X.shape[0], n_bins=1,
                             exposure=float(self.exposure))
        import scipy.sparse as sp
        A = X if sp.issparse(X) else sp.csr_matrix(X)
        inst = SpectInstance(geom, A, np.asarray(y, dtype=float),
                             prior=self._make_prior(X.shape[1]))
        self.sigma_ = inst.sigma
        self.theta_hat_ = map_estimate(inst, tol=self.tol, max_iter=self.max_iter)
        self.plugin_ = plugin_approx(inst, self.theta_hat_, eps=self.eps)
        self._instance = inst
        return self

    def predict(self, X):
        """Expected count rates ``X @ theta_hat``."""
        check_is_fitted(self, "theta_hat_")
        X = check_array(X, accept_sparse="csr")
        return np.asarray(X @ self.theta_hat_).ravel()

    def sample(self, n_samples=1, random_state=None):
        """Parameter draws from the fitted approximate posterior."""
        check_is_fitted(self, "plugin_")
        rng = np.random.default_rng(random_state)
        z = plugin_sample(self.plugin_, rng, n_samples)
        return self.theta_hat_ + z

    def score_samples(self, Theta):
        """Log approximate-posterior density at parameter points (rows)."""
        check_is_fitted(self, "plugin_")
        Theta = check_array(Theta, ensure_2d=False)
        Theta = np.atleast_2d(Theta)
        return np.asarray(plugin_logdensity(self.plugin_, Theta - self.theta_hat_))

    def credible_intervals(self, level=0.95):
        """Per-pixel marginal intervals: Gamma-tail for dark pixels, Gaussian otherwise."""
        check_is_fitted(self, "plugin_")
        beta = 1.0 - level
        pa = self.plugin_
        out = np.empty((pa.p, 2))
        z = _normal_quantile(1.0 - beta / 2.0)
        if pa.regular.size:
            sd = self.sigma_ * np.sqrt(np.diag(pa.information_inv()))
            out[pa.regular, 0] = np.maximum(self.theta_hat_[pa.regular] - z * sd, 0.0)
            out[pa.regular, 1] = self.theta_hat_[pa.regular] + z * sd
        for k, j in enumerate(pa.nonregular):
            out[j] = (0.0, gamma_quantile(beta, 1.0) * self.sigma_ ** 2 / pa.rates[k])
        return out


def _normal_quantile(q):
    from scipy.special import ndtri
    return float(ndtri(q))
