"""Quantitative comparison of posteriors with their limits.

Total variation here follows the convention ``|mu1 - mu2| = 2 int (f-1)+ dmu2
= int |f1 - f2|`` for densities, so values live in [0, 2].  One-dimensional
distances use adaptive quadrature; in higher dimension only per-marginal
distances summed into an upper bound are offered, because multivariate TV
estimation from samples is statistically fragile.

``tv_bound`` evaluates the nonasymptotic upper bound on the distance between
the rescaled posterior and its limit, term by term, with every constant
computed from the local expansion; set-restricted normalizing measures are
estimated by Monte Carlo from the limit-distribution module and their errors
are propagated into the report.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._validation import check_rng, check_vector
from .boundary import BoundaryPartition, LocalExpansion, in_neighbourhood
from .exceptions import DimensionError, DomainError, InsufficientSamplesError
from .limitdist import (LimitMeasure, TiltedNormal, gamma_lower, gamma_quantile,
                        gamma_tail)
from .mcmc import ChainOutput

_TINY = 1e-300


# --------------------------------------------------------------------------
# Total variation estimators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TVEstimate:
    value: float
    method: str  # "Quadrature1D" or "HistogramKD"
    error: float

    def __post_init__(self):
        if not -1e-9 <= self.value <= 2.0 + 1e-9:
            raise DomainError(f"TV value {self.value} outside [0, 2]")


def _split_points(lo, hi, points):
    if points is None:
        return None
    pts = [p for p in points if lo < p < hi]
    return pts or None


def _quad(fn, lo, hi, points=None, epsrel=1e-10):
    # |f - g| integrands have kinks at unknown crossings, so the subdivision
    # cap is routinely hit; the error estimate is propagated to the caller
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if np.isinf(hi) or np.isinf(lo):
            # QUADPACK ignores break points on infinite ranges; split manually
            if points:
                mid = max(points)
                v1, e1 = integrate.quad(fn, lo, mid, points=_split_points(lo, mid, points),
                                        epsabs=0.0, epsrel=epsrel, limit=300)
                v2, e2 = integrate.quad(fn, mid, hi, epsabs=0.0, epsrel=epsrel, limit=300)
                return v1 + v2, e1 + e2
            return integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=epsrel, limit=300)
        return integrate.quad(fn, lo, hi, points=_split_points(lo, hi, points),
                              epsabs=0.0, epsrel=epsrel, limit=300)


def tv_quadrature_1d(logpdf_a, logpdf_b, support, points=None, epsrel=1e-10) -> TVEstimate:
    """``int |f_a - f_b|`` over the support, both densities normalized internally.

    ``points`` marks known kinks (support edges of one density, say) to help
    the adaptive rule.  The error estimate combines the normalizer and
    distance quadrature errors.
    """
    lo, hi = support

    def density(logpdf):
        def f(x):
            v = logpdf(x)
            return math.exp(v) if v > -np.inf else 0.0
        z, ze = _quad(f, lo, hi, points=points, epsrel=epsrel)
        if not np.isfinite(z) or z <= 0:
            raise DomainError("density does not normalize on the given support")
        return f, z, ze / z

    fa, za, ra = density(logpdf_a)
    fb, zb, rb = density(logpdf_b)
    val, err = _quad(lambda x: abs(fa(x) / za - fb(x) / zb), lo, hi,
                     points=points, epsrel=max(epsrel, 1e-9))
    total_err = err + (ra + rb) * val
    return TVEstimate(min(max(val, 0.0), 2.0), "Quadrature1D", float(total_err))


def tv_histogram_1d(samples, logpdf=None, samples_b=None, bins=200, support=None) -> TVEstimate:
    """Histogram total variation between samples and a density (or second sample set).

    A diagnostic rather than a precision tool: the value carries the usual
    kernel/binning bias, reported through a crude ``sqrt(bins/n)`` error term.
    """
    samples = np.asarray(samples, dtype=float)
    if support is None:
        lo, hi = samples.min(), samples.max()
        if samples_b is not None:
            lo = min(lo, np.min(samples_b))
            hi = max(hi, np.max(samples_b))
        pad = 1e-9 * (hi - lo + 1.0)
        lo, hi = lo - pad, hi + pad
    else:
        lo, hi = support
    edges = np.linspace(lo, hi, bins + 1)
    p_mass, _ = np.histogram(samples, bins=edges)
    p_mass = p_mass / samples.size
    if samples_b is not None:
        q_mass, _ = np.histogram(np.asarray(samples_b, dtype=float), bins=edges)
        q_mass = q_mass / np.asarray(samples_b).size
        n_eff = min(samples.size, np.asarray(samples_b).size)
    elif logpdf is not None:
        q_mass = np.empty(bins)
        for k in range(bins):
            q_mass[k], _ = _quad(lambda x: math.exp(logpdf(x)), edges[k], edges[k + 1],
                                 epsrel=1e-8)
        q_mass = q_mass / max(q_mass.sum(), _TINY)
        n_eff = samples.size
    else:
        raise DomainError("provide either logpdf or samples_b")
    val = float(np.abs(p_mass - q_mass).sum())
    return TVEstimate(min(val, 2.0), "HistogramKD", math.sqrt(bins / n_eff))


def tv_marginal_upper_bound(samples, limit: LimitMeasure, bins=200):
    """Sum of per-coordinate histogram TVs: an upper bound on the joint TV.

    The limit's product structure makes each marginal available exactly
    (Gamma coordinates) or by sampling (the Gaussian block).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[1] != limit.dim:
        raise DimensionError("sample dimension does not match the limit measure")
    rng = np.random.default_rng(0)
    ref = limit.sample(rng, max(len(samples), 10_000))
    total = 0.0
    for j in range(limit.dim):
        total += tv_histogram_1d(samples[:, j], samples_b=ref[:, j], bins=bins).value
    return total


# --------------------------------------------------------------------------
# Prior flatness and posterior mass outside the neighbourhood
# --------------------------------------------------------------------------

def prior_flatness(prior, part: BoundaryPartition, theta_star, delta, rng=None, n=2000):
    """(C_pi, Delta_pi): local prior level and its relative oscillation.

    ``C_pi`` is the value at ``theta_star`` of the prior density divided by
    its boundary power factors; ``Delta_pi`` bounds the relative deviation of
    that ratio over the neighbourhood, estimated on uniform draws (exact 0 for
    pure power-law and Beta priors).
    """
    from .boundary import sample_neighbourhood
    from .families import BetaPrior, PowerLawPrior

    if isinstance(prior, (PowerLawPrior, BetaPrior)):
        return 1.0, 0.0
    expo = prior.exponents(part.p)

    def level(theta):
        lp = prior.log_density(theta)
        for j in list(part.regular_boundary) + list(part.nonregular):
            if expo[j] != 1.0 and theta[j] > 0:
                lp -= (expo[j] - 1.0) * math.log(theta[j])
        return lp

    c_log = level(np.asarray(theta_star, dtype=float))
    draws = sample_neighbourhood(part, theta_star, delta, check_rng(rng), n)
    dev = max(abs(level(t) - c_log) for t in draws)
    return math.exp(c_log), math.expm1(dev)


def _delta0_exponent(part: BoundaryPartition, prior_exponents):
    a0 = np.asarray(prior_exponents)[list(part.regular_boundary)]
    a1 = np.asarray(prior_exponents)[list(part.nonregular)]
    return part.n_regular + float(np.sum(a0 - 1.0)) + 2.0 * float(np.sum(a1))


def delta0_numeric(model, prior, part: BoundaryPartition, theta_star, delta,
                   epsrel=1e-9):
    """Scaled posterior mass outside the neighbourhood, by quadrature (p <= 2).

    ``sigma**-E * int_{outside} exp((loglik(theta) - loglik(theta_star)) / sigma^2)
    prior(dtheta)`` with ``E`` the rate exponent.  The outer integration box
    doubles until the added shell is negligible.
    """
    p = part.p
    if p > 2:
        raise DomainError("numeric mass computation supports p <= 2 only")
    theta_star = np.asarray(theta_star, dtype=float)
    base = model.loglik(theta_star)
    s2 = model.sigma ** 2

    def integrand(*theta):
        theta = np.array(theta)
        if in_neighbourhood(part, theta_star, delta, theta):
            return 0.0
        lp = prior.log_density(theta)
        if lp == -np.inf:
            return 0.0
        try:
            val = (model.loglik(theta) - base) / s2 + lp
        except DomainError:  # outside the model's natural parameter set
            return 0.0
        return math.exp(val) if val < 700 else math.inf

    hi = np.maximum(theta_star, 1.0) * 2.0 + 1.0
    prev = None
    for _ in range(60):
        if p == 1:
            val, _ = integrate.quad(integrand, 0.0, hi[0], epsabs=0.0, epsrel=epsrel,
                                    limit=400, points=[theta_star[0], delta[0], delta[1]])
        else:
            val, _ = integrate.dblquad(lambda b, a: integrand(a, b), 0.0, hi[0],
                                       0.0, hi[1], epsabs=1e-14, epsrel=max(epsrel, 1e-7))
        if prev is not None and abs(val - prev) <= 1e-12 * max(abs(val), 1e-30):
            break
        prev = val
        hi = hi * 2.0
    expo = _delta0_exponent(part, prior.exponents(p))
    return float(val) * model.sigma ** (-expo)


def delta0_lemma_bound(part: BoundaryPartition, prior_exponents, theta_star, sigma,
                       delta, c_delta0, c_delta1, c_pi0=1.0):
    """Closed-form upper bound on the outside mass from the drift condition.

    Requires the two drift constants of the sufficient linear-decay check; the
    pieces are the boundary-distance, regular-shell, and nonregular-shell
    integrals, each with its explicit prefactor.
    """
    delta0, delta1 = delta
    expo = np.asarray(prior_exponents, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    p0 = part.n_regular
    p1 = part.n_nonregular
    s2 = sigma * sigma
    log_j = -(float(expo[list(part.regular)].sum()) + 2.0 * float(expo[list(part.nonregular)].sum())) \
        * math.log(sigma)
    terms = []
    interior = list(part.regular_interior)
    if p0:
        tilde0 = delta0 / math.sqrt(p0)
        for j in interior:
            terms.append(expo[j] * math.log(sigma) - c_delta0 * (theta_star[j] - sigma) / s2)
        terms.append(math.log(p0 * s2 / c_delta0) - c_delta0 * tilde0 / s2)
        for j in interior:
            if expo[j] < 1.0:
                lead = (expo[j] - 1.0) * math.log(sigma)
            else:
                lead = (expo[j] - 1.0) * math.log(max(theta_star[j], _TINY))
            terms.append(lead + math.log(s2 / c_delta0) - c_delta0 * tilde0 / s2)
    if p1:
        terms.append(math.log(p1 * s2 / c_delta1) - c_delta1 * delta1 / s2)
    if not terms:
        return 0.0
    m = max(terms)
    return c_pi0 * math.exp(log_j + m) * sum(math.exp(t - m) for t in terms)


# --------------------------------------------------------------------------
# The nonasymptotic bound
# --------------------------------------------------------------------------

@dataclass
class BoundReport:
    delta: tuple
    delta_star: tuple
    admissible: dict
    terms: dict = None
    constants: dict = None
    mc_error: float = 0.0

    @property
    def is_admissible(self):
        return all(self.admissible.values())

    @property
    def total(self):
        if not self.is_admissible or self.terms is None:
            return None
        return float(sum(self.terms.values()))


def _log_gamma_block(shapes, rates):
    # log of prod Gamma(shape) / rate**shape
    return float(np.sum([math.lgamma(a) - a * math.log(r) for a, r in zip(shapes, rates)]))


def _ptn_block_log_integral(lq: LocalExpansion, precision, restrict_ball=None,
                            rng=None, n_mc=100_000):
    """log integral of the tilted kernel with linear coefficient
    ``information @ gauss_mean`` and the given precision, optionally restricted
    to the centred ball of the given radius.  Returns (log_value, rel_mc_error).
    """
    if lq.p0 == 0:
        return 0.0, 0.0
    b = lq.information @ lq.gauss_mean
    loc = np.linalg.solve(precision, b)
    shift = 0.5 * float(b @ loc)
    tn = TiltedNormal(loc, precision, lq.p0_star, lq.tilt_exponents)
    method = "quadrature" if lq.p0 <= 3 else "mc"
    z, _ = tn.normalizer(method=method, rng=rng)
    logval = shift + math.log(z)
    rel_err = 0.0
    if restrict_ball is not None and np.isfinite(restrict_ball):
        draws = tn.sample(check_rng(rng), n_mc)
        inside = np.linalg.norm(draws, axis=1) < restrict_ball
        frac = float(inside.mean())
        if frac == 0.0:
            raise DomainError("the rescaled ball carries no limit mass; enlarge delta0")
        logval += math.log(frac)
        rel_err = math.sqrt(frac * (1 - frac) / n_mc) / frac
    return logval, rel_err


def tv_bound(lq: LocalExpansion, part: BoundaryPartition, theta_star, delta, delta_star,
             delta_pi, delta_0, c_pi=1.0, c0=np.inf, c1=np.inf, rng=None,
             n_mc=100_000) -> BoundReport:
    """Nonasymptotic upper bound on the TV distance to the limit, term by term.

    The four summands are the Gamma-block tail/perturbation term, the
    Gaussian-block tail/perturbation term, the prior oscillation term and the
    outside-mass term.  Inadmissible inputs produce a report with flags and no
    total.  Set probabilities of the restricted measures are Monte Carlo with
    ``n_mc`` draws; the relative error is reported in ``mc_error``.
    """
    rng = check_rng(rng)
    delta0, delta1 = delta
    ds0, ds1 = delta_star
    sigma = lq.sigma
    theta_star = np.asarray(theta_star, dtype=float)
    R0 = delta0 / sigma
    R1 = delta1 / sigma ** 2
    a0_norm = float(np.linalg.norm(lq.gauss_mean))
    flags = {
        "delta_star1_below_a_min": bool(ds1 < lq.a_min) if lq.p1 else True,
        "delta_star0_below_lambda_min": bool(ds0 < lq.lambda_min) if lq.p0 else True,
        "delta0_below_theta_star_norm": bool(
            delta0 < np.linalg.norm(theta_star[list(part.regular)])) if lq.p0 else True,
        "delta0_below_c0": bool(delta0 <= c0),
        "delta1_below_c1": bool(delta1 <= c1),
        "gauss_mean_inside_ball": bool(a0_norm < R0) if lq.p0 else True,
        "prior_oscillation_below_one": bool(delta_pi < 1.0),
    }
    report = BoundReport((delta0, delta1), (ds0, ds1), flags)
    if not all(flags.values()):
        return report

    widened = lq.information + ds0 * np.eye(lq.p0)
    narrowed = lq.information - ds0 * np.eye(lq.p0)
    a_wide = lq.gamma_rates + ds1
    a_narrow = lq.gamma_rates - ds1

    log_mu_bar = _ptn_block_log_integral(lq, narrowed, rng=rng)[0] \
        + _log_gamma_block(lq.gamma_shapes, a_narrow)
    log_ptn_tilde_ball, rel_err = _ptn_block_log_integral(
        lq, widened, restrict_ball=R0, rng=rng, n_mc=n_mc)
    log_gamma_tilde_box = _log_gamma_block(lq.gamma_shapes, a_wide) + float(np.sum(
        [math.log(max(gamma_lower(r * R1, a), _TINY))
         for a, r in zip(lq.gamma_shapes, a_wide)]))
    log_mu_tilde_br = log_ptn_tilde_ball + log_gamma_tilde_box

    ratio = (1.0 + delta_pi) / (1.0 - delta_pi)
    C_A = math.exp(log_mu_bar - log_mu_tilde_br) * ratio
    C_2 = 4.0 / (1.0 - delta_pi)
    C_Delta = 2.0 * math.exp(-log_mu_tilde_br) / (c_pi * (1.0 - delta_pi))

    constants = {"C_A": C_A, "C_2": C_2, "C_Delta": C_Delta,
                 "log_mu_bar_V": log_mu_bar, "log_mu_tilde_BR": log_mu_tilde_br}
    terms = {}

    if lq.p1:
        C_1 = C_A * float(np.sum(lq.gamma_shapes / a_narrow))
        gamma_tails = max(gamma_tail(r * R1, a) for a, r in zip(lq.gamma_shapes, lq.gamma_rates))
        terms["gamma_block"] = 2.0 * max(C_1 * ds1, lq.p1 * gamma_tails)
        constants["C_1"] = C_1
    else:
        terms["gamma_block"] = 0.0

    if lq.p0:
        if lq.p0_star == 0:
            w = np.linalg.solve(narrowed, lq.information @ lq.gauss_mean)
            E_phi = 0.5 * float(w @ w) + 0.5 * float(np.trace(np.linalg.inv(narrowed)))
        else:
            b = lq.information @ lq.gauss_mean
            loc = np.linalg.solve(narrowed, b)
            tn = TiltedNormal(loc, narrowed, lq.p0_star, lq.tilt_exponents)
            if lq.p0 <= 2:
                mean, cov = tn.moments_quadrature()
                E_phi = 0.5 * (float(mean @ mean) + float(np.trace(cov)))
            else:
                draws = tn.sample(rng, n_mc)
                E_phi = 0.5 * float(np.mean(np.sum(draws * draws, axis=1)))
        C_0 = C_A * E_phi
        p_alpha0 = lq.p0 + float(np.sum(lq.tilt_exponents - 1.0))
        log_mu0 = _ptn_block_log_integral(lq, lq.information, rng=rng)[0] \
            + _log_gamma_block(lq.gamma_shapes, lq.gamma_rates)
        log_c_alpha0 = log_mu0 + (1.5 * p_alpha0 - lq.p0_star) * math.log(2.0) \
            + 0.5 * p_alpha0 * math.log(lq.lambda_min) \
            + 0.5 * (lq.p0 - lq.p0_star) * math.log(math.pi) \
            + float(np.sum([math.lgamma(a / 2.0) for a in lq.tilt_exponents]))
        tail_arg = 0.5 * lq.lambda_min * (R0 - a0_norm) ** 2
        gauss_tail = math.exp(log_c_alpha0) * gamma_tail(tail_arg, p_alpha0 / 2.0)
        terms["gauss_block"] = 2.0 * max(C_0 * ds0, gauss_tail)
        constants.update({"C_0": C_0, "E_Phi": E_phi, "p_alpha0": p_alpha0,
                          "log_C_alpha0": log_c_alpha0})
    else:
        terms["gauss_block"] = 0.0

    terms["prior"] = C_2 * delta_pi
    terms["mass"] = C_Delta * delta_0
    report.terms = terms
    report.constants = constants
    report.mc_error = rel_err
    return report


# --------------------------------------------------------------------------
# Credible intervals, agreement tables, functionals, drift check
# --------------------------------------------------------------------------

def credible_interval(limit: LimitMeasure, coord, beta, sigma, theta_star_j=0.0,
                      rng=None, n=100_000):
    """Marginal ``100*(1-beta)%`` credible interval on the parameter scale.

    Nonregular coordinates (``coord >= p0``, counted in the rescaled order)
    get the one-sided Gamma interval ``[0, q_beta * sigma**2 / rate]``;
    Gaussian-block coordinates get equal-tail interval endpoints from sampled
    marginal quantiles, mapped through ``theta = theta_star_j + sigma * v``.
    """
    if coord >= limit.p0:
        shape, rate = limit.gamma_marginal(coord - limit.p0)
        hi = gamma_quantile(beta, shape) * sigma ** 2 / rate
        return 0.0, float(hi)
    draws = limit.ptn.sample(check_rng(rng), n)[:, coord]
    lo, hi = np.quantile(draws, [beta / 2.0, 1.0 - beta / 2.0])
    return float(max(theta_star_j + sigma * lo, 0.0)), float(theta_star_j + sigma * hi)


@dataclass
class AgreementStats:
    """Plug-in versus chain summaries, split by pixel class."""

    nonregular_pixels: np.ndarray
    nonregular_plugin: np.ndarray   # plug-in rate for each pixel
    nonregular_mcmc: np.ndarray     # reciprocal scaled posterior mean
    regular_pixels: np.ndarray
    regular_plugin: np.ndarray      # sigma^2 * (information^-1)_jj
    regular_mcmc: np.ndarray        # posterior variance
    median_rel_err_nonregular: float
    q90_rel_err_nonregular: float
    median_rel_err_regular: float
    q90_rel_err_regular: float

    def to_table(self):
        rows = []
        for j, a, b in zip(self.nonregular_pixels, self.nonregular_plugin, self.nonregular_mcmc):
            rows.append({"pixel": int(j), "class": "nonregular", "plugin": float(a),
                         "mcmc": float(b)})
        for j, a, b in zip(self.regular_pixels, self.regular_plugin, self.regular_mcmc):
            rows.append({"pixel": int(j), "class": "regular", "plugin": float(a),
                         "mcmc": float(b)})
        return rows


def _rel_errs(plugin, mcmc):
    if len(plugin) == 0:
        return np.nan, np.nan
    rel = np.abs(plugin - mcmc) / np.abs(mcmc)
    return float(np.median(rel)), float(np.quantile(rel, 0.9))


def agreement_stats(chain: ChainOutput, pa, sigma, min_ess=100.0) -> AgreementStats:
    """Pairs (plug-in rate, reciprocal scaled posterior mean) over the
    nonregular pixels and (plug-in variance, chain variance) over the regular
    pixels, with median and 90th-percentile relative errors.
    """
    s2 = sigma ** 2
    low = [int(j) for j in np.concatenate([pa.nonregular, pa.regular])
           if chain.ess[int(j)] < min_ess]
    if low:
        raise InsufficientSamplesError(
            f"{len(low)} coordinates below ESS {min_ess}; first few: {low[:8]}")
    nr = pa.nonregular.astype(int)
    means = chain.samples[:, nr].mean(axis=0) if nr.size else np.zeros(0)
    recip = s2 / means if nr.size else np.zeros(0)
    reg = pa.regular.astype(int)
    if reg.size:
        plug_var = s2 * np.diag(pa.information_inv())
        mc_var = chain.samples[:, reg].var(axis=0, ddof=1)
    else:
        plug_var = mc_var = np.zeros(0)
    med1, q901 = _rel_errs(pa.rates, recip)
    med0, q900 = _rel_errs(plug_var, mc_var)
    return AgreementStats(nr, pa.rates.copy(), recip, reg, plug_var, mc_var,
                          med1, q901, med0, q900)


@dataclass(frozen=True)
class RegionSummary:
    mean: float
    var: float
    interval: tuple


def region_functional(samples, w, level=0.95) -> RegionSummary:
    """Posterior summary of the linear functional ``w @ theta`` from draws."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    w = check_vector(w, samples.shape[1], name="w")
    vals = samples @ w
    if np.allclose(w, 0.0):
        return RegionSummary(0.0, 0.0, (0.0, 0.0))
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(vals, [tail, 1.0 - tail])
    return RegionSummary(float(vals.mean()), float(vals.var(ddof=1)), (float(lo), float(hi)))


def region_weights(p, region, region_b=None):
    """Averaging vector over a pixel set; difference of averages when two sets given."""
    w = np.zeros(p)
    w[list(region)] = 1.0 / len(region)
    if region_b is not None:
        w[list(region_b)] -= 1.0 / len(region_b)
    return w


@dataclass
class DriftCheckReport:
    """Empirical drift constants for the linear-decay sufficient condition."""

    c_delta0: float
    c_delta1: float
    n_grid: int
    n_joint_violations: int
    scaled_margin0: float  # c_delta0 * delta0 / sigma^2
    scaled_margin1: float

    def margins_large(self, threshold=10.0):
        ok0 = not np.isfinite(self.scaled_margin0) or self.scaled_margin0 >= threshold
        return (self.scaled_margin0 >= threshold if np.isfinite(self.c_delta0) else ok0,
                self.scaled_margin1 >= threshold)


def assumption_L_check(model, prior, part: BoundaryPartition, theta_star, delta,
                       grid) -> DriftCheckReport:
    """Largest per-block drift constants on a grid outside the neighbourhood.

    For each grid point the likelihood drop must be at most
    ``-c0 * sum_regular |dtheta| - c1 * sum_nonregular |dtheta|``.  The
    per-block constants are estimated on points that move a single block;
    points that move both blocks are then checked against the pair and
    violations counted (report only).
    """
    theta_star = np.asarray(theta_star, dtype=float)
    base = model.loglik(theta_star)
    reg = list(part.regular)
    s1 = list(part.nonregular)
    c0, c1 = np.inf, np.inf
    entries = []
    for theta in np.atleast_2d(grid):
        if in_neighbourhood(part, theta_star, delta, theta):
            continue
        d = np.asarray(theta, dtype=float) - theta_star
        u0 = float(np.abs(d[reg]).sum())
        u1 = float(np.abs(d[s1]).sum())
        drop = model.loglik(theta) - base
        entries.append((drop, u0, u1))
        if u1 <= 1e-12 and u0 > 1e-12:
            c0 = min(c0, -drop / u0)
        if u0 <= 1e-12 and u1 > 1e-12:
            c1 = min(c1, -drop / u1)
    n_viol = sum(1 for drop, u0, u1 in entries
                 if drop > -(0.0 if not np.isfinite(c0) else c0) * u0
                 - (0.0 if not np.isfinite(c1) else c1) * u1 + 1e-9 * (1 + abs(drop)))
    s2 = model.sigma ** 2
    m0 = c0 * delta[0] / s2 if np.isfinite(c0) else np.inf
    m1 = c1 * delta[1] / s2 if np.isfinite(c1) else np.inf
    return DriftCheckReport(c0, c1, len(entries), n_viol, m0, m1)
