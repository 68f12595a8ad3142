"""Boundary classification, coordinate rescaling, and the local expansion.

Coordinates are split by the limit score at the maximiser ``theta_star``:
regular coordinates have zero score (further split into interior and
boundary), nonregular coordinates have strictly negative score and must sit
on the boundary.  A permutation stacks the blocks as
(regular interior, regular boundary, nonregular); the scaling transform then
recentres at ``theta_star`` and rescales the regular block by ``1/sigma`` and
the nonregular block by ``1/sigma**2``.

Everything here is pure and immutable; safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_index_sets, check_rng, check_spd, check_theta, check_vector
from .exceptions import DimensionError, DomainError


@dataclass(frozen=True)
class BoundaryPartition:
    """Index sets of the three coordinate blocks plus the stacking permutation.

    Attributes
    ----------
    regular_interior, regular_boundary, nonregular : tuple of int
        Sorted original coordinate indices of each block.
    eps_grad : float
        Score tolerance used by the classification.
    """

    regular_interior: tuple
    regular_boundary: tuple
    nonregular: tuple
    eps_grad: float

    def __post_init__(self):
        for name in ("regular_interior", "regular_boundary", "nonregular"):
            object.__setattr__(self, name, tuple(sorted(int(j) for j in getattr(self, name))))
        check_index_sets(self.p, self.regular_interior, self.regular_boundary, self.nonregular)

    @property
    def p(self):
        return len(self.regular_interior) + len(self.regular_boundary) + len(self.nonregular)

    @property
    def n_regular(self):
        return len(self.regular_interior) + len(self.regular_boundary)

    @property
    def n_regular_boundary(self):
        return len(self.regular_boundary)

    @property
    def n_nonregular(self):
        return len(self.nonregular)

    @property
    def regular(self):
        """All regular indices in permutation order (interior first)."""
        return self.regular_interior + self.regular_boundary

    @property
    def order(self):
        """Original indices in permuted order; row r of U picks coordinate order[r]."""
        return np.array(self.regular_interior + self.regular_boundary + self.nonregular, dtype=int)

    @property
    def U(self):
        """The permutation as a dense 0/1 matrix."""
        U = np.zeros((self.p, self.p))
        U[np.arange(self.p), self.order] = 1.0
        return U

    def permute(self, x):
        """Apply the permutation to a vector (same as ``U @ x``)."""
        return np.asarray(x)[self.order]

    def to_dict(self):
        return {
            "regular_interior": list(self.regular_interior),
            "regular_boundary": list(self.regular_boundary),
            "nonregular": list(self.nonregular),
            "eps_grad": self.eps_grad,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["regular_interior"]), tuple(d["regular_boundary"]),
                   tuple(d["nonregular"]), float(d["eps_grad"]))


def default_eps_grad(grad_star):
    return 1e-8 * (1.0 + float(np.max(np.abs(grad_star), initial=0.0)))


def classify(theta_star, grad_star, eps_grad=None) -> BoundaryPartition:
    """Partition coordinates from the maximiser and the limit score there.

    Parameters
    ----------
    theta_star : (p,) nonnegative vector
    grad_star : (p,) limit score at ``theta_star``
    eps_grad : float, optional
        Tolerance for treating a score coordinate as zero.  Defaults to
        ``1e-8 * (1 + max |grad_star|)``.  Classification near the threshold
        is inherently unstable, so expose this in configuration when scores
        are estimated.

    Raises
    ------
    DomainError
        If some score coordinate exceeds ``+eps_grad`` (the maximiser property
        forbids positive scores) or a strictly negative score occurs at a
        coordinate with ``theta_star > 0``.
    """
    theta_star = check_theta(theta_star, name="theta_star")
    grad_star = check_vector(grad_star, n=theta_star.size, name="grad_star")
    if eps_grad is None:
        eps_grad = default_eps_grad(grad_star)
    if np.any(grad_star > eps_grad):
        j = int(np.argmax(grad_star))
        raise DomainError(
            f"grad_star[{j}] = {grad_star[j]} > eps_grad; a positive limit score contradicts "
            f"theta_star being the maximiser")
    neg = grad_star < -eps_grad
    bad = neg & (theta_star > 0)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise DomainError(
            f"coordinate {j} has negative limit score but theta_star[{j}] = {theta_star[j]} > 0; "
            f"nonregular coordinates must lie on the boundary")
    s1 = np.flatnonzero(neg)
    zero_score = np.flatnonzero(~neg)
    s0_boundary = [j for j in zero_score if theta_star[j] == 0.0]
    s0_interior = [j for j in zero_score if theta_star[j] > 0.0]
    return BoundaryPartition(tuple(s0_interior), tuple(s0_boundary), tuple(s1), float(eps_grad))


@dataclass
class LocalExpansion:
    """Curvature and slope data of the scaled log-likelihood at the maximiser.

    Attributes
    ----------
    information : (p0, p0) SPD matrix
        Negative Hessian on the regular block (Fisher-information analogue).
    gauss_mean : (p0,) vector
        ``information^{-1} @ grad_regular / sigma``, the random recentring of
        the Gaussian block.
    gamma_rates : (p1,) positive vector
        Negative limit score on the nonregular block.
    tilt_exponents : (p0_star,) positive vector
        Prior exponents of the regular boundary coordinates.
    gamma_shapes : (p1,) positive vector
        Prior exponents of the nonregular coordinates.
    sigma : float
    """

    information: np.ndarray
    gauss_mean: np.ndarray
    gamma_rates: np.ndarray
    tilt_exponents: np.ndarray
    gamma_shapes: np.ndarray
    sigma: float
    _chol: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.information, self._chol = check_spd(np.asarray(self.information, dtype=float), "information")
        self.gauss_mean = check_vector(np.atleast_1d(self.gauss_mean), self.information.shape[0], "gauss_mean")
        self.gamma_rates = np.atleast_1d(np.asarray(self.gamma_rates, dtype=float))
        self.tilt_exponents = np.atleast_1d(np.asarray(self.tilt_exponents, dtype=float))
        self.gamma_shapes = check_vector(np.atleast_1d(self.gamma_shapes), self.gamma_rates.size, "gamma_shapes")
        if np.any(self.gamma_rates <= 0):
            raise DomainError("the nonregular slope vector must have strictly positive coordinates")
        if np.any(self.tilt_exponents <= 0) or np.any(self.gamma_shapes <= 0):
            raise DomainError("prior exponents must be positive")
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")

    @property
    def p0(self):
        return self.information.shape[0]

    @property
    def p0_star(self):
        return self.tilt_exponents.size

    @property
    def p1(self):
        return self.gamma_rates.size

    @property
    def lambda_min(self):
        if self.p0 == 0:
            return np.inf
        return float(np.linalg.eigvalsh(self.information)[0])

    @property
    def a_min(self):
        if self.p1 == 0:
            return np.inf
        return float(self.gamma_rates.min())

    def limit_measure(self):
        """The limiting product measure of the rescaled posterior."""
        from .limitdist import LimitMeasure, TiltedNormal

        ptn = TiltedNormal(self.gauss_mean, self.information, self.p0_star, self.tilt_exponents)
        return LimitMeasure(ptn, self.gamma_shapes, self.gamma_rates)

    def to_dict(self):
        return {
            "information": self.information.tolist(),
            "gauss_mean": self.gauss_mean.tolist(),
            "gamma_rates": self.gamma_rates.tolist(),
            "tilt_exponents": self.tilt_exponents.tolist(),
            "gamma_shapes": self.gamma_shapes.tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["information"]), np.asarray(d["gauss_mean"]),
                   np.asarray(d["gamma_rates"]), np.asarray(d["tilt_exponents"]),
                   np.asarray(d["gamma_shapes"]), float(d["sigma"]))


def local_quadratic(model, part: BoundaryPartition, theta_star, prior=None,
                    use_limit_hessian=True) -> LocalExpansion:
    """Build the local expansion at ``theta_star`` for a classified model.

    The information matrix is taken from the limit Hessian when the family has
    one (the plug-in route uses the data Hessian instead); the Gaussian mean
    always uses the data score.  Prior exponents default to 1 (flat prior).
    """
    theta_star = check_theta(theta_star, model.p)
    reg = list(part.regular)
    s1 = list(part.nonregular)
    use_limit = use_limit_hessian and model.has_limit
    H = model.limit_hessian(theta_star, theta_star) if use_limit else model.hessian(theta_star)
    info = -np.asarray(H)[np.ix_(reg, reg)]
    grad_data = model.gradient(theta_star)
    if model.has_limit:
        grad_limit = model.limit_gradient(theta_star, theta_star)
    else:
        grad_limit = grad_data
    rates = -np.asarray(grad_limit)[s1]
    info_sym, chol = check_spd(info, "information")
    g0 = np.asarray(grad_data)[reg]
    z = np.linalg.solve(info_sym, g0) if len(reg) else np.zeros(0)
    gauss_mean = z / model.sigma
    if prior is not None:
        expo = prior.exponents(model.p)
    else:
        expo = np.ones(model.p)
    alpha0 = expo[list(part.regular_boundary)]
    alpha1 = expo[s1]
    return LocalExpansion(info_sym, gauss_mean, rates, alpha0, alpha1, model.sigma)


@dataclass(frozen=True)
class ScalingTransform:
    """Recentring and block rescaling ``v = D_sigma^{-1} U (theta - theta_star)``.

    ``D_sigma = diag(sigma * I_p0, sigma**2 * I_p1)``.  ``inverse`` restores
    ``theta`` exactly up to round-off; negative coordinates beyond -1e-12 in
    the result raise a domain error, smaller ones are clamped to 0.
    """

    partition: BoundaryPartition
    theta_star: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "theta_star", check_theta(self.theta_star, self.partition.p))
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")

    @property
    def scales(self):
        p0, p1 = self.partition.n_regular, self.partition.n_nonregular
        return np.concatenate([np.full(p0, self.sigma), np.full(p1, self.sigma ** 2)])

    def forward(self, theta):
        theta = check_theta(theta, self.partition.p)
        return (theta - self.theta_star)[self.partition.order] / self.scales

    def inverse(self, v):
        v = check_vector(v, self.partition.p, name="v")
        theta = np.empty_like(v)
        theta[self.partition.order] = v * self.scales
        theta += self.theta_star
        if np.any(theta < -1e-12):
            j = int(np.argmin(theta))
            raise DomainError(f"inverse transform gives theta[{j}] = {theta[j]} < -1e-12")
        return np.maximum(theta, 0.0)


# --------------------------------------------------------------------------
# Neighbourhoods of theta_star and the likelihood sandwich
# --------------------------------------------------------------------------

def in_neighbourhood(part: BoundaryPartition, theta_star, delta, theta):
    """Membership in the mixed-norm neighbourhood with radii (delta0, delta1).

    The regular block must lie in an open Euclidean ball of radius ``delta0``
    around ``theta_star`` and the nonregular block in an open sup-norm box of
    radius ``delta1``.
    """
    delta0, delta1 = delta
    d = np.asarray(theta, dtype=float) - np.asarray(theta_star, dtype=float)
    reg = list(part.regular)
    s1 = list(part.nonregular)
    ok0 = np.linalg.norm(d[reg]) < delta0 if reg else True
    ok1 = np.max(np.abs(d[s1]), initial=0.0) < delta1 if s1 else True
    return bool(ok0 and ok1)


def sample_neighbourhood(part: BoundaryPartition, theta_star, delta, rng, size):
    """Uniform draws from the neighbourhood intersected with the orthant."""
    rng = check_rng(rng)
    delta0, delta1 = delta
    theta_star = check_theta(theta_star, part.p)
    reg = list(part.regular)
    s1 = list(part.nonregular)
    out = np.empty((size, part.p))
    out[:, :] = theta_star
    if s1:
        out[:, s1] = rng.uniform(0.0, delta1, size=(size, len(s1)))
    if reg:
        k = len(reg)
        filled = 0
        while filled < size:
            need = size - filled
            z = rng.normal(size=(2 * need, k))
            r = rng.uniform(size=2 * need) ** (1.0 / k)
            ball = z / np.linalg.norm(z, axis=1, keepdims=True) * (r * delta0)[:, None]
            cand = theta_star[reg] + ball
            good = cand[np.all(cand >= 0.0, axis=1)]
            take = min(need, good.shape[0])
            out[filled:filled + take, reg] = good[:take]
            filled += take
    return out


@dataclass
class SandwichReport:
    n_samples: int
    n_violations: int
    max_violation: float
    tol: float

    @property
    def ok(self):
        return self.n_violations == 0


def sandwich_check(model, part: BoundaryPartition, lq: LocalExpansion, theta_star,
                   delta, delta_star, theta_samples, tol=1e-9) -> SandwichReport:
    """Verify the two-sided quadratic/linear envelope of the likelihood drop.

    At each sample ``theta`` in the neighbourhood, the drop
    ``loglik(theta) - loglik(theta_star)`` must lie between the bound computed
    with the widened curvature/slope ``(information + d0*I, rates + d1*1)``
    (lower) and the narrowed one (upper), where ``(d0, d1) = delta_star``.
    Points outside the neighbourhood are skipped.  Report-only: never raises
    on violations.
    """
    d0, d1 = delta_star
    if lq.p1 and d1 >= lq.a_min:
        raise DomainError("delta_star[1] must be below the smallest nonregular slope")
    if lq.p0 and d0 >= lq.lambda_min:
        raise DomainError("delta_star[0] must be below the smallest information eigenvalue")
    theta_star = check_theta(theta_star, model.p)
    reg = list(part.regular)
    s1 = list(part.nonregular)
    base = model.loglik(theta_star)
    g0 = model.gradient(theta_star)[reg]
    info = lq.information
    widened = info + d0 * np.eye(lq.p0)
    narrowed = info - d0 * np.eye(lq.p0)
    a_wide = lq.gamma_rates + d1
    a_narrow = lq.gamma_rates - d1
    n_checked = 0
    n_viol = 0
    max_viol = 0.0
    for theta in np.atleast_2d(theta_samples):
        if not in_neighbourhood(part, theta_star, delta, theta):
            continue
        n_checked += 1
        drop = model.loglik(theta) - base
        u = theta[reg] - theta_star[reg]
        t = theta[s1]
        lin = float(g0 @ u)
        lower = lin - 0.5 * float(u @ widened @ u) - float(a_wide @ t)
        upper = lin - 0.5 * float(u @ narrowed @ u) - float(a_narrow @ t)
        slack = tol * (1.0 + abs(drop))
        viol = max(lower - drop, drop - upper)
        if viol > slack:
            n_viol += 1
            max_viol = max(max_viol, viol)
    return SandwichReport(n_checked, n_viol, max_viol, tol)
