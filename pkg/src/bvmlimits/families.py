"""Scaled log-likelihood families and prior specifications.

The scaled log-likelihood of a model with noise level ``sigma`` is
``sigma**2`` times the ordinary log-likelihood, with additive terms that do
not depend on the parameter dropped once per family (documented in each
class).  For i.i.d. data ``sigma**2 = 1/n``; for the photon-count model
``sigma**2`` is the reciprocal exposure time.  Each family also evaluates the
small-noise limit of the scaled log-likelihood, which for the built-in
exponential-family models is the scaled log-likelihood of noise-free data.

All evaluators are pure functions of ``(model, theta)``; model instances are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

from ._validation import check_matrix, check_theta, check_vector
from .exceptions import DimensionError, DomainError


def _ratio_or_zero(num, den, what):
    """num/den with the convention 0/0 = 0; num>0, den=0 is a domain error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    bad = (num > 0) & (den <= 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DomainError(f"{what}: observation {i} has positive count but zero mean")
    out = np.zeros_like(num)
    pos = num > 0
    out[pos] = num[pos] / den[pos]
    return out


class ScaledLikelihood(abc.ABC):
    """Interface shared by all likelihood families.

    Attributes
    ----------
    p : int
        Parameter dimension.
    sigma : float
        Noise scale; ``sigma**2`` multiplies the log-likelihood.
    """

    p: int
    sigma: float

    @abc.abstractmethod
    def loglik(self, theta) -> float:
        """Scaled log-likelihood at ``theta`` (additive constants dropped)."""

    @abc.abstractmethod
    def gradient(self, theta) -> np.ndarray:
        """Gradient of the scaled log-likelihood (one-sided on the boundary)."""

    @abc.abstractmethod
    def hessian(self, theta) -> np.ndarray:
        """Dense Hessian of the scaled log-likelihood."""

    # Limit counterparts require the maximizing point theta_star.
    def limit_loglik(self, theta, theta_star) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form limit")

    def limit_gradient(self, theta, theta_star) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form limit")

    def limit_hessian(self, theta, theta_star) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form limit")

    @property
    def has_limit(self) -> bool:
        try:
            self.limit_loglik  # probe for an override
        except NotImplementedError:  # pragma: no cover
            return False
        return type(self).limit_loglik is not ScaledLikelihood.limit_loglik


class PoissonGLM(ScaledLikelihood):
    """Poisson linear model ``counts_i ~ Poisson(T * A_i theta)`` with identity link.

    ``y`` holds rates (counts per unit exposure), so the scaled log-likelihood
    is ``sum_i y_i*log(A_i theta) - A_i theta`` after dropping terms free of
    ``theta`` (including ``y_i*log T`` and the factorials).  Cells with
    ``y_i = 0`` and ``A_i theta = 0`` contribute 0, the limit of
    ``y log mu - mu``.

    Parameters
    ----------
    A : (n, p) array or sparse matrix, nonnegative
    y : (n,) array of nonnegative rates
    exposure : float
        Exposure (or sample size for i.i.d. data); ``sigma = exposure**-0.5``.
    """

    def __init__(self, A, y, exposure=1.0):
        A = check_matrix(A, nonnegative=True, name="A")
        self.A = A
        self.n, self.p = A.shape
        self.y = check_vector(y, n=self.n, name="y")
        if np.any(self.y < 0):
            raise DomainError("y must be nonnegative")
        if exposure <= 0:
            raise DomainError("exposure must be positive")
        self.exposure = float(exposure)
        self.sigma = self.exposure ** -0.5

    @classmethod
    def iid(cls, counts, n=None):
        """Model ``n`` i.i.d. Poisson(theta) observations from their counts.

        ``counts`` may be the raw observation vector (then ``n = len(counts)``)
        or a total with ``n`` given explicitly.
        """
        counts = np.atleast_1d(np.asarray(counts, dtype=float))
        if n is None:
            n = counts.size
            total = counts.sum()
        else:
            total = counts.sum()
        return cls(np.ones((1, 1)), [total / n], exposure=n)

    def _mu(self, theta):
        theta = check_theta(theta, self.p)
        return self.A @ theta

    def loglik(self, theta):
        mu = self._mu(theta)
        _ratio_or_zero(self.y, mu, "loglik")  # domain check
        return float(np.sum(xlogy(self.y, np.where(self.y > 0, mu, 1.0))) - mu.sum())

    def gradient(self, theta):
        mu = self._mu(theta)
        r = _ratio_or_zero(self.y, mu, "gradient") - 1.0
        return np.asarray(self.A.T @ r).ravel()

    def hessian(self, theta):
        mu = self._mu(theta)
        w = _ratio_or_zero(self.y, mu * mu, "hessian")
        if sp.issparse(self.A):
            Aw = self.A.multiply(w[:, None])
            return -np.asarray((self.A.T @ Aw).todense())
        return -(self.A.T * w) @ self.A

    def _limit_model(self, theta_star):
        y_star = self._mu(theta_star)
        return PoissonGLM(self.A, y_star, exposure=self.exposure)

    def limit_loglik(self, theta, theta_star):
        return self._limit_model(theta_star).loglik(theta)

    def limit_gradient(self, theta, theta_star):
        return self._limit_model(theta_star).gradient(theta)

    def limit_hessian(self, theta, theta_star):
        return self._limit_model(theta_star).hessian(theta)

    def is_well_posed(self):
        """True when ``A^T A`` has full rank (dense check)."""
        A = self.A.toarray() if sp.issparse(self.A) else self.A
        return np.linalg.matrix_rank(A) == self.p


class Binomial(ScaledLikelihood):
    """Independent ``Y_i ~ Bin(trials_i, theta_i)`` with success probabilities as parameters.

    ``sigma**2 = 1/n`` with ``n = sum(trials)``; the coordinate weights are
    ``omega_i = trials_i / n``.  The scaled log-likelihood is
    ``(1/n) * sum_i [y_i log theta_i + (trials_i - y_i) log(1 - theta_i)]``.
    """

    def __init__(self, trials, y):
        self.trials = np.asarray(trials, dtype=float)
        if self.trials.ndim != 1 or np.any(self.trials <= 0):
            raise DomainError("trials must be a vector of positive counts")
        self.p = self.trials.size
        self.y = check_vector(y, n=self.p, name="y")
        if np.any(self.y < 0) or np.any(self.y > self.trials):
            raise DomainError("y must satisfy 0 <= y_i <= trials_i")
        self.n = float(self.trials.sum())
        self.sigma = self.n ** -0.5
        self.omega = self.trials / self.n

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        theta = check_vector(theta, n=self.p, name="theta")
        if np.any(theta < 0) or np.any(theta > 1):
            raise DomainError("theta must lie in [0, 1]^p")
        return theta

    @staticmethod
    def _terms(succ, fail, theta, what):
        _ratio_or_zero(succ, theta, what)
        _ratio_or_zero(fail, 1.0 - theta, what)
        return np.sum(xlogy(succ, np.where(succ > 0, theta, 1.0))
                      + xlogy(fail, np.where(fail > 0, 1.0 - theta, 1.0)))

    def loglik(self, theta):
        theta = self._check(theta)
        return float(self._terms(self.y, self.trials - self.y, theta, "loglik")) / self.n

    def gradient(self, theta):
        theta = self._check(theta)
        s = _ratio_or_zero(self.y, theta, "gradient")
        f = _ratio_or_zero(self.trials - self.y, 1.0 - theta, "gradient")
        return (s - f) / self.n

    def hessian(self, theta):
        theta = self._check(theta)
        s = _ratio_or_zero(self.y, theta * theta, "hessian")
        f = _ratio_or_zero(self.trials - self.y, (1.0 - theta) ** 2, "hessian")
        return np.diag(-(s + f) / self.n)

    # The limit replaces observed frequencies with the true probabilities:
    # sum_i omega_i [theta*_i log theta_i + (1 - theta*_i) log(1 - theta_i)].
    def limit_loglik(self, theta, theta_star):
        theta = self._check(theta)
        theta_star = self._check(theta_star)
        t = xlogy(self.omega * theta_star, np.where(theta_star > 0, theta, 1.0))
        u = xlogy(self.omega * (1.0 - theta_star), np.where(theta_star < 1, 1.0 - theta, 1.0))
        _ratio_or_zero(theta_star, theta, "limit_loglik")
        _ratio_or_zero(1.0 - theta_star, 1.0 - theta, "limit_loglik")
        return float(np.sum(t + u))

    def limit_gradient(self, theta, theta_star):
        theta = self._check(theta)
        theta_star = self._check(theta_star)
        s = _ratio_or_zero(theta_star, theta, "limit_gradient")
        f = _ratio_or_zero(1.0 - theta_star, 1.0 - theta, "limit_gradient")
        return self.omega * (s - f)

    def limit_hessian(self, theta, theta_star):
        theta = self._check(theta)
        theta_star = self._check(theta_star)
        s = _ratio_or_zero(theta_star, theta * theta, "limit_hessian")
        f = _ratio_or_zero(1.0 - theta_star, (1.0 - theta) ** 2, "limit_hessian")
        return np.diag(-self.omega * (s + f))


class MixedEffects(ScaledLikelihood):
    """One-way Gaussian random-effects model, ``n`` groups of size ``m``.

    ``Y_ij = mu + b_i + e_ij`` with ``e_ij ~ N(0, tau2)`` and group effects
    ``b_i ~ N(0, ratio * tau2)``.  The group-effect strength is parameterised
    by the variance ratio, so the marginal group-mean variance is
    ``tau2 * (ratio + 1/m)``; the boundary of interest is ``ratio = 0``.

    Two modes:

    * ``joint=False`` (default): ``mu`` and ``tau2`` known, single parameter
      ``theta = (ratio,)``.
    * ``joint=True``: ``theta = (mu, tau2, ratio)`` estimated jointly.

    ``sigma**2 = 1/n``.
    """

    def __init__(self, y, mu=0.0, tau2=1.0, joint=False):
        y = np.asarray(y, dtype=float)
        if y.ndim != 2 or y.shape[1] < 2:
            raise DimensionError("y must be an (n_groups, m) matrix with m >= 2")
        self.n_groups, self.m = y.shape
        self.sigma = self.n_groups ** -0.5
        self.joint = bool(joint)
        self.p = 3 if self.joint else 1
        self.mu0 = float(mu)
        self.tau20 = float(tau2)
        if self.tau20 <= 0:
            raise DomainError("tau2 must be positive")
        ybar = y.mean(axis=1)
        self._grand_mean = float(ybar.mean())
        self._between0 = float(np.mean((ybar - self._grand_mean) ** 2))
        self._within = float(np.mean(np.sum((y - ybar[:, None]) ** 2, axis=1)))

    # Shared core: l(mu, t, v) = -(m log t + log v)/2 - (w + q(mu)/v)/(2 t)
    # with v = ratio + 1/m and q(mu) = q0 + (mu - mu_hat)^2.  The data version
    # uses (w, q0, mu_hat) = (mean within-SS, var of group means, grand mean);
    # the limit version uses ((m-1) tau2*, tau2* (ratio* + 1/m), mu*).
    def _core(self, theta, w, q0, mu_hat):
        theta = np.asarray(theta, dtype=float)
        if self.joint:
            theta = check_vector(theta, 3, name="theta")
            mu, t, ratio = theta
        else:
            theta = check_vector(theta, 1, name="theta")
            mu, t, ratio = self.mu0, self.tau20, theta[0]
        if t <= 0:
            raise DomainError("tau2 must be positive")
        if ratio < 0:
            raise DomainError("the variance ratio must be nonnegative")
        v = ratio + 1.0 / self.m
        q = q0 + (mu - mu_hat) ** 2
        if self.joint:
            val = -0.5 * (self.m * np.log(t) + np.log(v)) - (w + q / v) / (2.0 * t)
        else:
            # mu and tau2 fixed: their additive terms are constants and dropped
            val = -0.5 * np.log(v) - q / (2.0 * t * v)
        d_mu = -(mu - mu_hat) / (t * v)
        d_t = -self.m / (2 * t) + (w + q / v) / (2 * t * t)
        d_v = -0.5 / v + q / (2 * t * v * v)
        grad3 = np.array([d_mu, d_t, d_v])
        h = np.empty((3, 3))
        h[0, 0] = -1.0 / (t * v)
        h[0, 1] = h[1, 0] = (mu - mu_hat) / (t * t * v)
        h[0, 2] = h[2, 0] = (mu - mu_hat) / (t * v * v)
        h[1, 1] = self.m / (2 * t * t) - (w + q / v) / (t ** 3)
        h[1, 2] = h[2, 1] = -q / (2 * t * t * v * v)
        h[2, 2] = 0.5 / (v * v) - q / (t * v ** 3)
        if self.joint:
            return float(val), grad3, h
        return float(val), grad3[2:], h[2:, 2:]

    def _data_stats(self):
        return self._within, self._between0, self._grand_mean

    def _limit_stats(self, theta_star):
        theta_star = np.asarray(theta_star, dtype=float).ravel()
        if self.joint:
            if theta_star.size != 3:
                raise DimensionError("theta_star must have length 3 in joint mode")
            mu_s, t_s, r_s = theta_star
        else:
            if theta_star.size != 1:
                raise DimensionError("theta_star must have length 1")
            mu_s, t_s, r_s = self.mu0, self.tau20, theta_star[0]
        return (self.m - 1) * t_s, t_s * (r_s + 1.0 / self.m), mu_s

    def loglik(self, theta):
        return self._core(theta, *self._data_stats())[0]

    def gradient(self, theta):
        return self._core(theta, *self._data_stats())[1]

    def hessian(self, theta):
        return self._core(theta, *self._data_stats())[2]

    def limit_loglik(self, theta, theta_star):
        return self._core(theta, *self._limit_stats(theta_star))[0]

    def limit_gradient(self, theta, theta_star):
        return self._core(theta, *self._limit_stats(theta_star))[1]

    def limit_hessian(self, theta, theta_star):
        return self._core(theta, *self._limit_stats(theta_star))[2]

    @staticmethod
    def simulate(n_groups, m, mu, tau2, ratio, rng):
        """Draw an (n_groups, m) data matrix from the model."""
        b = rng.normal(0.0, np.sqrt(ratio * tau2), size=n_groups)
        e = rng.normal(0.0, np.sqrt(tau2), size=(n_groups, m))
        return mu + b[:, None] + e


@dataclass
class CustomFamily(ScaledLikelihood):
    """User-supplied evaluators; no symbolic differentiation is attempted."""

    p: int
    sigma: float
    loglik_fn: Callable[[np.ndarray], float]
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    limit_loglik_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    limit_gradient_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    limit_hessian_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def _call(self, fn, *args):
        if fn is None:
            raise NotImplementedError("evaluator not supplied for this custom family")
        return fn(*args)

    def loglik(self, theta):
        return float(self._call(self.loglik_fn, np.asarray(theta, dtype=float)))

    def gradient(self, theta):
        return np.asarray(self._call(self.gradient_fn, np.asarray(theta, dtype=float)), dtype=float)

    def hessian(self, theta):
        return np.asarray(self._call(self.hessian_fn, np.asarray(theta, dtype=float)), dtype=float)

    def limit_loglik(self, theta, theta_star):
        return float(self._call(self.limit_loglik_fn, np.asarray(theta, float), np.asarray(theta_star, float)))

    def limit_gradient(self, theta, theta_star):
        return np.asarray(
            self._call(self.limit_gradient_fn, np.asarray(theta, float), np.asarray(theta_star, float)), dtype=float)

    def limit_hessian(self, theta, theta_star):
        return np.asarray(
            self._call(self.limit_hessian_fn, np.asarray(theta, float), np.asarray(theta_star, float)), dtype=float)

    @property
    def has_limit(self):
        return self.limit_loglik_fn is not None


# --------------------------------------------------------------------------
# Priors
# --------------------------------------------------------------------------

class Prior(abc.ABC):
    """Prior density on the parameter space, known up to a constant.

    ``log_density`` returns ``-inf`` where the density vanishes (not an
    error) and ``+inf`` at an integrable singularity.  ``exponents(p)``
    reports the local power-law behaviour ``theta_j**(alpha_j - 1)`` near the
    boundary, one exponent per coordinate (1 where the density is locally
    constant).
    """

    kind: str

    @abc.abstractmethod
    def log_density(self, theta) -> float: ...

    @abc.abstractmethod
    def grad_log_density(self, theta) -> np.ndarray: ...

    @abc.abstractmethod
    def exponents(self, p) -> np.ndarray: ...

    def hess_log_density(self, theta) -> np.ndarray:
        raise NotImplementedError


def _powerlaw_terms(alphas, theta):
    out = 0.0
    for a, t in zip(alphas, theta):
        if a == 1.0:
            continue
        if t == 0.0:
            return np.inf if a < 1.0 else -np.inf
        out += (a - 1.0) * np.log(t)
    return out


@dataclass
class PowerLawPrior(Prior):
    """``p(theta) ~ prod theta_j**(alpha_j - 1)`` on the nonnegative orthant.

    ``alpha = 1`` everywhere is the flat prior; ``alpha = 1/2`` is the
    Jeffreys prior for a Poisson mean.  Improper in general.
    """

    alphas: np.ndarray
    kind: str = field(default="PowerLaw", init=False)

    def __post_init__(self):
        self.alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        if np.any(self.alphas <= 0):
            raise DomainError("all prior exponents must be positive")

    def _alphas(self, p):
        if self.alphas.size == 1:
            return np.full(p, self.alphas[0])
        if self.alphas.size != p:
            raise DimensionError(f"prior has {self.alphas.size} exponents, model has {p}")
        return self.alphas

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(_powerlaw_terms(self._alphas(theta.size), theta))

    def grad_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        a = self._alphas(theta.size)
        return np.where(a == 1.0, 0.0, (a - 1.0) / np.where(theta > 0, theta, np.nan))

    def hess_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        a = self._alphas(theta.size)
        d = np.where(a == 1.0, 0.0, -(a - 1.0) / np.where(theta > 0, theta ** 2, np.nan))
        return np.diag(d)

    def exponents(self, p):
        return self._alphas(p).copy()


def flat_prior():
    """Flat (Lebesgue) prior; a power law with all exponents equal to 1."""
    return PowerLawPrior(np.array([1.0]))


@dataclass
class BetaPrior(Prior):
    """Independent ``Beta(alpha_j, 1)`` priors on [0, 1] coordinates."""

    alphas: np.ndarray
    kind: str = field(default="BetaConjugate", init=False)

    def __post_init__(self):
        self._pl = PowerLawPrior(self.alphas)
        self.alphas = self._pl.alphas

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta > 1.0) or np.any(theta < 0.0):
            return -np.inf
        return self._pl.log_density(theta)

    def grad_log_density(self, theta):
        return self._pl.grad_log_density(theta)

    def hess_log_density(self, theta):
        return self._pl.hess_log_density(theta)

    def exponents(self, p):
        return self._pl.exponents(p)


@dataclass
class GammaPrior(Prior):
    """Independent ``Gamma(alpha_j, rate b_j)`` priors (improper when b = 0)."""

    alphas: np.ndarray
    rates: np.ndarray
    kind: str = field(default="GammaConjugate", init=False)

    def __post_init__(self):
        self._pl = PowerLawPrior(self.alphas)
        self.alphas = self._pl.alphas
        self.rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if np.any(self.rates < 0):
            raise DomainError("rates must be nonnegative")

    def _rates(self, p):
        return np.full(p, self.rates[0]) if self.rates.size == 1 else check_vector(self.rates, p, "rates")

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0):
            return -np.inf
        return self._pl.log_density(theta) - float(self._rates(theta.size) @ theta)

    def grad_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self._pl.grad_log_density(theta) - self._rates(theta.size)

    def hess_log_density(self, theta):
        return self._pl.hess_log_density(theta)

    def exponents(self, p):
        return self._pl.exponents(p)


@dataclass
class LogCoshMRFPrior(Prior):
    """Pairwise-difference Markov random field with a log cosh potential.

    ``log p(theta) = -zeta*(1+zeta)/(2*gamma**2) * sum_{(j,k) in edges}
    log cosh((theta_j - theta_k)/zeta)`` up to a constant.  Improper (invariant
    under adding a constant to ``theta``) but yields a proper posterior for
    photon-count models whenever some detector row has positive total weight.
    The density is bounded away from 0 and infinity locally, so every local
    exponent is 1.
    """

    edges: np.ndarray
    gamma: float
    zeta: float
    kind: str = field(default="LogCoshMRF", init=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        if self.gamma <= 0 or self.zeta <= 0:
            raise DomainError("gamma and zeta must be positive")
        self._coef = self.zeta * (1.0 + self.zeta) / (2.0 * self.gamma ** 2)

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        d = theta[self.edges[:, 0]] - theta[self.edges[:, 1]]
        # log cosh(x) computed stably as |x| + log1p(exp(-2|x|)) - log 2
        ax = np.abs(d) / self.zeta
        logcosh = ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)
        return float(-self._coef * logcosh.sum())

    def grad_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        d = (theta[self.edges[:, 0]] - theta[self.edges[:, 1]]) / self.zeta
        t = np.tanh(d) * (self._coef / self.zeta)
        g = np.zeros_like(theta)
        np.add.at(g, self.edges[:, 0], -t)
        np.add.at(g, self.edges[:, 1], t)
        return g

    def hess_log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        p = theta.size
        d = (theta[self.edges[:, 0]] - theta[self.edges[:, 1]]) / self.zeta
        w = (self._coef / self.zeta ** 2) / np.cosh(d) ** 2
        H = np.zeros((p, p))
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.add.at(H, (i, i), -w)
        np.add.at(H, (j, j), -w)
        np.add.at(H, (i, j), w)
        np.add.at(H, (j, i), w)
        return H

    def exponents(self, p):
        return np.ones(p)


def grid_edges(rows, cols):
    """4-neighbour adjacency for a rows x cols pixel grid, row-major indexing."""
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    return np.vstack([horiz, vert])


_PRIOR_KINDS = {
    "PowerLaw": PowerLawPrior,
    "BetaConjugate": BetaPrior,
    "GammaConjugate": GammaPrior,
    "LogCoshMRF": LogCoshMRFPrior,
}


def make_prior(kind, **params):
    """Factory used by configuration files."""
    try:
        cls = _PRIOR_KINDS[kind]
    except KeyError:
        raise DomainError(f"unknown prior kind {kind!r}; choose from {sorted(_PRIOR_KINDS)}")
    return cls(**params)


# --------------------------------------------------------------------------
# Module-level operations
# --------------------------------------------------------------------------

def eval_scaled_loglik(model: ScaledLikelihood, theta) -> float:
    return model.loglik(theta)


def eval_gradient(model: ScaledLikelihood, theta) -> np.ndarray:
    return model.gradient(theta)


def eval_hessian(model: ScaledLikelihood, theta) -> np.ndarray:
    return model.hessian(theta)


def eval_limit_loglik(model: ScaledLikelihood, theta, theta_star) -> float:
    return model.limit_loglik(theta, theta_star)


def log_posterior_kernel(model: ScaledLikelihood, prior: Prior, theta) -> float:
    """``loglik(theta)/sigma**2 + log prior(theta)`` up to an additive constant.

    Returns ``-inf`` (not an error) where the prior density is zero.
    """
    lp = prior.log_density(theta)
    if lp == -np.inf:
        return -np.inf
    return model.loglik(theta) / model.sigma ** 2 + lp
