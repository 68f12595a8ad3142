"""The limiting measure: tilted truncated Gaussian times a Gamma product.

``TiltedNormal`` is a multivariate Gaussian kernel restricted to
``R^(p0-p0_star) x R_+^p0_star`` and multiplied by ``x_j**(alpha_j - 1)`` on
the last ``p0_star`` coordinates.  ``LimitMeasure`` pairs it with independent
Gamma coordinates.  The module also provides the upper regularized incomplete
gamma function and its inverse, implemented directly (series for small
arguments, continued fraction for large) because the nonasymptotic bound
machinery pins their accuracy.

Distribution objects are immutable after construction; sampling takes an
external Generator so threads can keep independent streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from ._validation import check_rng, check_spd, check_vector
from .exceptions import DimensionError, DomainError, NonconvergenceError, ParameterRegimeError

_EPS = np.finfo(float).eps
_TINY = 1e-300


# --------------------------------------------------------------------------
# Incomplete gamma tail and quantile
# --------------------------------------------------------------------------

def _gamma_p_series(a, x, tol=1e-15, max_iter=500):
    # Lower regularized P(a, x) by the ascending series, for x < a + 1.
    if x == 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * tol:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NonconvergenceError("incomplete gamma series did not converge")


def _gamma_q_contfrac(a, x, tol=1e-15, max_iter=500):
    # Upper regularized Q(a, x) by the Lentz continued fraction, for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NonconvergenceError("incomplete gamma continued fraction did not converge")


def gamma_tail(x, alpha):
    """Upper regularized incomplete gamma ``Q(alpha, x) = P(Gamma(alpha, 1) > x)``.

    Series representation for ``x < alpha + 1``, continued fraction otherwise;
    absolute accuracy about 1e-12 over the usable double range.
    """
    if np.ndim(x) or np.ndim(alpha):
        x, alpha = np.broadcast_arrays(np.asarray(x, float), np.asarray(alpha, float))
        return np.array([gamma_tail(float(xi), float(ai)) for xi, ai in zip(x.ravel(), alpha.ravel())
                         ]).reshape(x.shape)
    x = float(x)
    alpha = float(alpha)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < alpha + 1.0:
        return 1.0 - _gamma_p_series(alpha, x)
    return _gamma_q_contfrac(alpha, x)


def gamma_lower(x, alpha):
    """Lower regularized incomplete gamma ``P(alpha, x) = 1 - Q(alpha, x)``."""
    if np.ndim(x) or np.ndim(alpha):
        return 1.0 - gamma_tail(x, alpha)
    x = float(x)
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < alpha + 1.0:
        return _gamma_p_series(alpha, x)
    return 1.0 - _gamma_q_contfrac(alpha, x)


def gamma_quantile(beta, alpha, tol=1e-10, max_iter=300):
    """Solve ``Q(alpha, x) = beta`` for ``x`` (upper-tail quantile of Gamma(alpha, 1)).

    Log-scale bracketing with safeguarded Newton (small-``alpha`` quantiles sit
    at astronomically small ``x``, so absolute-scale bisection cannot resolve
    them); stops when ``|Q(alpha, x) - beta| <= tol * beta`` or the log-scale
    bracket narrows to 1e-13.
    """
    beta = float(beta)
    alpha = float(alpha)
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must be in (0, 1)")
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    hi = max(alpha, 1.0)
    while gamma_tail(hi, alpha) > beta:
        hi *= 2.0
        if hi > 1e300:
            raise NonconvergenceError("quantile bracket expansion failed")
    u_lo, u_hi = -700.0, math.log(hi)  # Q decreasing in x: Q(e^u_lo) ~ 1, Q(e^u_hi) <= beta
    u = 0.5 * (u_lo + u_hi)
    lgam = math.lgamma(alpha)
    for _ in range(max_iter):
        x = math.exp(u)
        q = gamma_tail(x, alpha)
        err = q - beta
        if abs(err) <= tol * beta:
            return x
        if q > beta:
            u_lo = u
        else:
            u_hi = u
        # d(Q)/du = -x**alpha e**-x / Gamma(alpha)
        log_slope = alpha * u - x - lgam
        u_new = u + err * math.exp(-log_slope) if log_slope > -700 else None
        if u_new is not None and u_lo < u_new < u_hi:
            u = u_new
        else:
            u = 0.5 * (u_lo + u_hi)
        if u_hi - u_lo <= 1e-13:
            return math.exp(0.5 * (u_lo + u_hi))
    return math.exp(u)


def gamma_logpdf(v, shape, rate):
    """Log density of Gamma(shape, rate) elementwise; -inf off the support."""
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, -np.inf)
    pos = v > 0
    out[pos] = (shape * np.log(rate) - math.lgamma(shape)
                + (shape - 1.0) * np.log(v[pos]) - rate * v[pos])
    if shape == 1.0:  # density is positive at 0
        out[v == 0] = np.log(rate)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# 1-d tilted truncated normal sampler (used by the Gibbs stage)
# --------------------------------------------------------------------------

_STALL_LIMIT = 10_000


def _truncnorm_positive(m, rng):
    """Exact draws of N(m, 1) conditioned to (0, inf); m is a 1-d array."""
    out = np.empty_like(m)
    c = -m  # lower bound for the standardized variable
    easy = c <= 8.0
    if np.any(easy):
        q = ndtr(-c[easy])  # P(W > c)
        u = rng.uniform(size=easy.sum())
        out[easy] = m[easy] - ndtri((1.0 - u) * q)
    hard = ~easy
    if np.any(hard):
        ch = c[hard]
        lam = 0.5 * (ch + np.sqrt(ch * ch + 4.0))
        w = np.empty(ch.size)
        todo = np.ones(ch.size, dtype=bool)
        for _ in range(_STALL_LIMIT):
            k = int(todo.sum())
            if k == 0:
                break
            prop = ch[todo] + rng.exponential(size=k) / lam[todo]
            acc = rng.uniform(size=k) < np.exp(-0.5 * (prop - lam[todo]) ** 2)
            idx = np.flatnonzero(todo)[acc]
            w[idx] = prop[acc]
            todo[idx] = False
        else:  # pragma: no cover
            raise ParameterRegimeError("tail truncated-normal sampler stalled")
        out[hard] = m[hard] + w
    return out


def sample_tilted_1d(alpha, mu, omega, rng, size):
    """Exact i.i.d. draws with density proportional to ``x**(alpha-1) * exp(-omega*(x-mu)**2/2)`` on x > 0.

    ``mu`` may be scalar or an array of length ``size`` (one location per
    draw).  Rejection envelopes: a Gamma envelope when the location pushes
    mass toward 0, a log-tangent truncated-normal envelope for ``alpha > 1``
    with positive location, and a two-piece power-law/half-normal envelope for
    ``alpha < 1`` with standardized location above 1 (the switch point).
    Raises when the acceptance rate collapses below about 1e-6.
    """
    rng = check_rng(rng)
    if alpha <= 0 or omega <= 0:
        raise DomainError("alpha and omega must be positive")
    s = omega ** -0.5
    m = np.broadcast_to(np.asarray(mu, dtype=float) / s, (size,)).copy()
    out = np.empty(size)
    if alpha == 1.0:
        return s * _truncnorm_positive(m, rng)

    filled = np.zeros(size, dtype=bool)
    for attempt in range(_STALL_LIMIT):
        todo = np.flatnonzero(~filled)
        if todo.size == 0:
            break
        mt = m[todo]
        z = np.empty(todo.size)
        acc = np.zeros(todo.size, dtype=bool)

        neg = mt <= 0.0 if alpha > 1.0 else mt <= 1.0
        if np.any(neg):  # Gamma(alpha, lam) envelope, accept exp(-(z - z0)^2 / 2)
            mm = mt[neg]
            lam = 0.5 * (np.sqrt(mm * mm + 4.0 * alpha) - mm)
            z0 = mm + lam
            prop = rng.gamma(alpha, 1.0 / lam)
            ok = rng.uniform(size=lam.size) < np.exp(-0.5 * (prop - z0) ** 2)
            z[neg] = prop
            acc[neg] = ok
        pos = ~neg
        if np.any(pos) and alpha > 1.0:
            # tangent envelope: x**(a-1) <= x***(a-1) * exp((a-1)(x-x*)/x*)
            mm = mt[pos]
            zstar = 0.5 * (mm + np.sqrt(mm * mm + 4.0 * (alpha - 1.0)))
            shift = mm + (alpha - 1.0) / zstar
            prop = _truncnorm_positive(shift, rng)
            logr = (alpha - 1.0) * (np.log(prop / zstar) - (prop - zstar) / zstar)
            ok = np.log(rng.uniform(size=mm.size)) < logr
            z[pos] = prop
            acc[pos] = ok
        elif np.any(pos):
            # two pieces split at the location: power-law body and half-normal tail
            mm = mt[pos]
            mass_body = mm ** alpha / alpha
            mass_tail = mm ** (alpha - 1.0) * math.sqrt(math.pi / 2.0)
            take_body = rng.uniform(size=mm.size) < mass_body / (mass_body + mass_tail)
            prop = np.where(take_body,
                            mm * rng.uniform(size=mm.size) ** (1.0 / alpha),
                            mm + np.abs(rng.normal(size=mm.size)))
            logr = np.where(take_body,
                            -0.5 * (prop - mm) ** 2,
                            (alpha - 1.0) * np.log(prop / mm))
            ok = np.log(rng.uniform(size=mm.size)) < logr
            z[pos] = prop
            acc[pos] = ok

        hit = todo[acc]
        out[hit] = z[acc]
        filled[hit] = True
        if attempt == 200 and filled.sum() == 0:
            raise ParameterRegimeError("tilted truncated-normal rejection sampler is stalling")
    if not filled.all():
        raise ParameterRegimeError(
            f"rejection sampler failed to fill {int((~filled).sum())} of {size} draws")
    return s * out


# --------------------------------------------------------------------------
# Tilted truncated multivariate normal
# --------------------------------------------------------------------------

GIBBS_BURN_IN = 100  # sweeps before the state of each parallel chain is kept


@dataclass(eq=False)
class TiltedNormal:
    """Gaussian kernel ``exp(-(x-loc)' precision (x-loc)/2)`` on
    ``R^(p0-n_trunc) x R_+^n_trunc`` tilted by ``x_j**(alpha_j - 1)`` on the
    last ``n_trunc`` coordinates.

    ``n_trunc = 0`` reduces to the exact Gaussian; unit tilt exponents give a
    plain truncated Gaussian.  Instances are immutable by convention.
    """

    loc: np.ndarray
    precision: np.ndarray
    n_trunc: int
    tilt_exponents: np.ndarray = None

    def __post_init__(self):
        self.loc = np.atleast_1d(np.asarray(self.loc, dtype=float))
        self.precision, self._chol = check_spd(self.precision, "precision")
        p0 = self.loc.size
        if self.precision.shape != (p0, p0):
            raise DimensionError("precision shape does not match loc")
        if not 0 <= self.n_trunc <= p0:
            raise DimensionError("n_trunc must lie in [0, p0]")
        if self.tilt_exponents is None:
            self.tilt_exponents = np.ones(self.n_trunc)
        self.tilt_exponents = check_vector(np.atleast_1d(self.tilt_exponents) if self.n_trunc else
                                           np.zeros(0), self.n_trunc, "tilt_exponents")
        if np.any(self.tilt_exponents <= 0):
            raise DomainError("tilt exponents must be positive")

    @property
    def p0(self):
        return self.loc.size

    @property
    def n_free(self):
        return self.p0 - self.n_trunc

    def _cov(self):
        if self.p0 == 0:
            return np.zeros((0, 0))
        eye = np.eye(self.p0)
        half = np.linalg.solve(self._chol, eye)
        return half.T @ half

    def logpdf_unnorm(self, x):
        """Log of the unnormalized density; -inf off the support.

        At a boundary zero with an exponent below 1 the literal value
        (``+inf``) is returned; integrals treat the singularity separately.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.p0:
            raise DimensionError(f"points have dimension {x.shape[1]}, expected {self.p0}")
        d = x - self.loc
        quad = 0.5 * np.einsum("ij,jk,ik->i", d, self.precision, d)
        out = -quad
        for r, a in enumerate(self.tilt_exponents):
            xj = x[:, self.n_free + r]
            neg = xj < 0
            if a != 1.0:
                with np.errstate(divide="ignore"):
                    out = out + (a - 1.0) * np.log(np.abs(xj))
            out = np.where(neg, -np.inf, out)
        return float(out[0]) if single else out

    # -- normalizing constant ------------------------------------------------

    def normalizer(self, method="auto", rng=None, n_mc=100_000, epsrel=1e-10):
        """Integral of the unnormalized density over the support.

        Returns ``(value, error_estimate)``.  ``quadrature`` (closed form when
        nothing is truncated, nested adaptive quadrature up to dimension 3,
        allowed up to 12 but increasingly slow) reports a relative error
        bound; ``mc`` importance sampling reports a standard error.
        """
        if self.p0 == 0:
            return 1.0, 0.0
        if method == "auto":
            method = "quadrature" if (self.n_trunc == 0 or self.p0 <= 3) else "mc"
        if method == "quadrature":
            if self.n_trunc == 0:
                logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
                return float(np.exp(0.5 * self.p0 * np.log(2 * np.pi) - 0.5 * logdet)), 0.0
            if self.p0 > 12:
                raise DomainError("quadrature normalizer supports dimension <= 12")
            if self.p0 > 2:
                epsrel = max(epsrel, 1e-8)
            return self._quad_integral(epsrel=epsrel)
        if method == "mc":
            return self._mc_integral(check_rng(rng), n_mc)
        raise DomainError(f"unknown normalizer method {method!r}")

    def log_normalizer(self, method="auto", rng=None):
        val, _ = self.normalizer(method=method, rng=rng)
        return float(np.log(val))

    def _coordinate_ranges(self, width=12.0):
        sd = np.sqrt(np.diag(self._cov()))
        lo = self.loc - width * sd
        hi = self.loc + width * sd
        j0 = self.n_free
        lo[j0:] = 0.0
        hi[j0:] = np.maximum(self.loc[j0:], 0.0) + width * sd[j0:]
        return lo, hi

    def _quad_integral(self, integrand_extra=None, epsrel=1e-10):
        """Nested adaptive quadrature; substitutes u = x**alpha on tilted coordinates."""
        lo, hi = self._coordinate_ranges()
        j0 = self.n_free
        alphas = self.tilt_exponents
        errs = []

        def gauss_part(x):
            d = x - self.loc
            val = math.exp(-0.5 * float(d @ self.precision @ d))
            if integrand_extra is not None:
                val *= integrand_extra(x)
            return val

        def level(k, xs):
            if k == self.p0:
                return gauss_part(np.array(xs))
            if k >= j0:
                a = alphas[k - j0]
                ua = hi[k] ** a

                def inner(u):
                    return level(k + 1, xs + [u ** (1.0 / a)])

                val, err = integrate.quad(inner, 0.0, ua, epsabs=0.0, epsrel=epsrel, limit=200)
                errs.append(abs(err) / (abs(val) + _TINY))
                return val / a

            def inner(x):
                return level(k + 1, xs + [x])

            val, err = integrate.quad(inner, lo[k], hi[k], epsabs=0.0, epsrel=epsrel, limit=200)
            errs.append(abs(err) / (abs(val) + _TINY))
            return val

        total = level(0, [])
        rel = float(np.sum(errs[: self.p0])) if errs else 0.0
        return float(total), abs(total) * rel

    def _mc_integral(self, rng, n):
        j0 = self.n_free
        cov = self._cov()
        sd = np.sqrt(np.diag(cov))
        x = np.empty((n, self.p0))
        logq = np.zeros(n)
        if j0:
            covf = 2.25 * cov[:j0, :j0]
            Lf = np.linalg.cholesky(covf)
            z = rng.normal(size=(n, j0))
            x[:, :j0] = self.loc[:j0] + z @ Lf.T
            logdet = np.sum(np.log(np.diag(Lf)))
            logq += -0.5 * np.sum(z * z, axis=1) - logdet - 0.5 * j0 * math.log(2 * math.pi)
        for r in range(self.n_trunc):
            a = self.tilt_exponents[r]
            w = 1.0 / cov[j0 + r, j0 + r]
            mloc = self.loc[j0 + r]
            lam = 0.5 * w * (math.sqrt(mloc * mloc + 4.0 * a / w) - mloc)
            xi = rng.gamma(a, 1.0 / lam, size=n)
            x[:, j0 + r] = xi
            logq += a * math.log(lam) - math.lgamma(a) + (a - 1.0) * np.log(xi) - lam * xi
        logw = self.logpdf_unnorm(x) - logq
        mx = np.max(logw)
        w = np.exp(logw - mx)
        est = float(np.exp(mx) * w.mean())
        se = float(np.exp(mx) * w.std(ddof=1) / math.sqrt(n))
        return est, se

    def moments_quadrature(self, epsrel=1e-9):
        """Mean vector and covariance by nested quadrature (practical up to dimension 2)."""
        if self.p0 > 2:
            epsrel = max(epsrel, 1e-6)
        z, _ = self._quad_integral(epsrel=epsrel)
        mean = np.array([self._quad_integral(lambda x, j=j: x[j], epsrel=epsrel)[0] / z
                         for j in range(self.p0)])
        second = np.empty((self.p0, self.p0))
        for i in range(self.p0):
            for j in range(i + 1):
                second[i, j] = second[j, i] = self._quad_integral(
                    lambda x, i=i, j=j: x[i] * x[j], epsrel=epsrel)[0] / z
        return mean, second - np.outer(mean, mean)

    # -- sampling --------------------------------------------------------------

    def sample(self, rng, size):
        """``size`` independent draws.

        The truncated/tilted block is drawn from its marginal (the free block
        is integrated out exactly): one-dimensional marginals are sampled by
        exact rejection; higher-dimensional ones by per-coordinate Gibbs run
        as ``size`` parallel chains for ``GIBBS_BURN_IN`` sweeps, keeping each
        chain's final state.  The free block is then drawn from its exact
        Gaussian conditional.
        """
        rng = check_rng(rng)
        if self.p0 == 0:
            return np.zeros((size, 0))
        j0 = self.n_free
        out = np.empty((size, self.p0))
        if self.n_trunc == 0:
            z = rng.normal(size=(size, self.p0))
            out[:] = self.loc + np.linalg.solve(self._chol.T, z.T).T
            return out

        # marginal of the truncated block: precision is the Schur complement
        if j0:
            off = self.precision[j0:, :j0]
            prec_t = self.precision[j0:, j0:] - off @ np.linalg.solve(self.precision[:j0, :j0], off.T)
        else:
            prec_t = self.precision
        loc_t = self.loc[j0:]
        if self.n_trunc == 1:
            xt = sample_tilted_1d(self.tilt_exponents[0], loc_t[0], prec_t[0, 0], rng, size)[:, None]
        else:
            xt = self._gibbs_truncated(prec_t, loc_t, rng, size)
        out[:, j0:] = xt
        if j0:
            prec_f = self.precision[:j0, :j0]
            Lf = np.linalg.cholesky(prec_f)
            shift = np.linalg.solve(prec_f, ((xt - loc_t) @ self.precision[j0:, :j0]).T).T
            mean_f = self.loc[:j0] - shift
            z = rng.normal(size=(size, j0))
            out[:, :j0] = mean_f + np.linalg.solve(Lf.T, z.T).T
        return out

    def _gibbs_truncated(self, prec, loc, rng, size):
        k = loc.size
        diag = np.diag(prec)
        start = np.maximum(loc, 1.0 / np.sqrt(diag))
        x = np.tile(start, (size, 1))
        for _ in range(GIBBS_BURN_IN):
            for j in range(k):
                others = np.delete(np.arange(k), j)
                # conditional mean given the other coordinates
                mu_j = loc[j] - ((x[:, others] - loc[others]) @ prec[others, j]) / diag[j]
                x[:, j] = sample_tilted_1d(self.tilt_exponents[j], mu_j, diag[j], rng, size)
        return x


@dataclass(eq=False)
class LimitMeasure:
    """Product of a tilted truncated Gaussian block and independent Gammas.

    The Gamma coordinates are mutually independent and independent of the
    Gaussian block; ``gamma_shapes`` come from the prior exponents and
    ``gamma_rates`` from the negative limit score.
    """

    ptn: TiltedNormal
    gamma_shapes: np.ndarray
    gamma_rates: np.ndarray

    def __post_init__(self):
        self.gamma_shapes = np.atleast_1d(np.asarray(self.gamma_shapes, dtype=float))
        self.gamma_rates = check_vector(np.atleast_1d(self.gamma_rates), self.gamma_shapes.size,
                                        "gamma_rates")
        if np.any(self.gamma_shapes <= 0) or np.any(self.gamma_rates <= 0):
            raise DomainError("Gamma shapes and rates must be positive")
        self._log_norm = None

    @property
    def p0(self):
        return self.ptn.p0

    @property
    def p1(self):
        return self.gamma_rates.size

    @property
    def dim(self):
        return self.p0 + self.p1

    @classmethod
    def pure_gamma(cls, shapes, rates):
        return cls(TiltedNormal(np.zeros(0), np.zeros((0, 0)), 0), shapes, rates)

    def gamma_marginal(self, i):
        """(shape, rate) of nonregular coordinate ``i`` of the rescaled block."""
        return float(self.gamma_shapes[i]), float(self.gamma_rates[i])

    def sample(self, rng, size):
        rng = check_rng(rng)
        parts = [self.ptn.sample(rng, size)]
        if self.p1:
            parts.append(rng.gamma(self.gamma_shapes, 1.0 / self.gamma_rates, size=(size, self.p1)))
        return np.hstack(parts)

    def logpdf_unnorm(self, v):
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        v = np.atleast_2d(v)
        if v.shape[1] != self.dim:
            raise DimensionError(f"points have dimension {v.shape[1]}, expected {self.dim}")
        out = np.zeros(v.shape[0]) if self.p0 == 0 else np.atleast_1d(
            self.ptn.logpdf_unnorm(v[:, :self.p0]))
        for i in range(self.p1):
            vi = v[:, self.p0 + i]
            with np.errstate(divide="ignore", invalid="ignore"):
                term = (self.gamma_shapes[i] - 1.0) * np.log(np.abs(vi)) - self.gamma_rates[i] * vi
            if self.gamma_shapes[i] == 1.0:
                term = -self.gamma_rates[i] * vi
            out = np.where(vi < 0, -np.inf, out + term)
        return float(out[0]) if single else out

    def log_normalizer(self, method="auto", rng=None):
        if self._log_norm is None:
            log_norm = self.ptn.log_normalizer(method=method, rng=rng)
            for a, r in zip(self.gamma_shapes, self.gamma_rates):
                log_norm += math.lgamma(a) - a * math.log(r)
            self._log_norm = float(log_norm)
        return self._log_norm

    def logpdf(self, v, method="auto", rng=None):
        return self.logpdf_unnorm(v) - self.log_normalizer(method=method, rng=rng)


def limit_sample(measure: LimitMeasure, rng, size):
    return measure.sample(rng, size)


def limit_logdensity(measure: LimitMeasure, v):
    return measure.logpdf(v)
