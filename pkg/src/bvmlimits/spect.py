"""Photon-count tomography test-bed: projector, simulation, MAP, plug-in posterior.

The scanner is a 2-d parallel-beam system.  The system matrix uses strip
integrals: entry (i, j) is the overlap area of detector strip i with pixel j
divided by the strip width (units of length), optionally damped by an
exponential attenuation along the ray path and a global decay factor.  Strips
are smoother than line integrals and leave fewer all-zero columns.

Counts are Poisson: ``exposure * Y_i ~ Poisson(exposure * A_i theta)`` with
``Y`` stored as rates (counts per unit exposure) and noise scale
``sigma = exposure ** -0.5``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp

from ._validation import check_rng, check_theta, check_vector
from .exceptions import (DimensionError, DomainError, GeometryError,
                         NonconvergenceError, SingularInformationError)
from .families import LogCoshMRFPrior, PoissonGLM, PowerLawPrior, grid_edges, log_posterior_kernel


@dataclass(frozen=True)
class SpectGeometry:
    """Scanner description.

    ``n_angles`` projections with angles ``k * pi / n_angles``; each projection
    has ``n_bins`` detector strips spanning ``max(rows, cols) * pixel_size``.
    ``attenuation`` is the absorption coefficient per unit length (0 disables
    attenuation); ``decay`` is a global multiplicative factor; ``exposure`` is
    the photon-collection time.
    """

    rows: int
    cols: int
    pixel_size: float = 1.0
    n_angles: int = 32
    n_bins: int = 24
    attenuation: float = 0.0
    decay: float = 1.0
    exposure: float = 1.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.n_angles < 1 or self.n_bins < 1:
            raise GeometryError("grid and projection counts must be positive")
        if self.pixel_size <= 0 or self.exposure <= 0 or self.decay <= 0:
            raise GeometryError("pixel_size, decay and exposure must be positive")
        if self.attenuation < 0:
            raise GeometryError("attenuation must be nonnegative")

    @property
    def p(self):
        return self.rows * self.cols

    @property
    def n(self):
        return self.n_angles * self.n_bins

    @property
    def sigma(self):
        return float(self.exposure) ** -0.5

    def pixel_centers(self):
        """(p, 2) array of pixel centre coordinates, row-major, row 0 at the top."""
        h = self.pixel_size
        xs = (np.arange(self.cols) - (self.cols - 1) / 2.0) * h
        ys = ((self.rows - 1) / 2.0 - np.arange(self.rows)) * h
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])

    def detector_length(self):
        return max(self.rows, self.cols) * self.pixel_size

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _halfplane_area(x0, y0, h, a, b, c):
    """Area of {a*x + b*y <= c} within squares [x0, x0+h] x [y0, y0+h].

    Vectorized over the square positions; (a, b) need not be normalized.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    # reflect so that a, b >= 0 (area is invariant)
    if a < 0:
        x0, a = -(x0 + h), -a
    if b < 0:
        y0, b = -(y0 + h), -b
    u = c - a * x0 - b * y0  # margin at the lower-left corner
    A, B = a * h, b * h
    if A < 1e-15 and B < 1e-15:
        return np.where(u >= 0, h * h, 0.0)
    if A < 1e-15:
        return h * h * np.clip(u / B, 0.0, 1.0)
    if B < 1e-15:
        return h * h * np.clip(u / A, 0.0, 1.0)

    def relu2(t):
        return np.square(np.maximum(t, 0.0))

    frac = (relu2(u) - relu2(u - A) - relu2(u - B) + relu2(u - A - B)) / (2.0 * A * B)
    return h * h * np.clip(frac, 0.0, 1.0)


def build_system_matrix(geom: SpectGeometry, n_jobs=1):
    """Strip-integral system matrix as a CSR sparse array.

    Entry ((angle, bin), pixel) = overlap area / strip width, scaled by
    ``decay * exp(-attenuation * depth)`` where depth is the along-ray
    distance from the pixel centre to the detector-side boundary plane.
    Deterministic for a fixed geometry.
    """
    centers = geom.pixel_centers()
    h = geom.pixel_size
    x0 = centers[:, 0] - h / 2.0
    y0 = centers[:, 1] - h / 2.0
    L = geom.detector_length()
    width = L / geom.n_bins
    edges = -L / 2.0 + width * np.arange(geom.n_bins + 1)
    half_extent = 0.5 * np.hypot(geom.rows, geom.cols) * h

    def one_angle(k):
        phi = np.pi * k / geom.n_angles
        a, b = np.cos(phi), np.sin(phi)
        # along-ray coordinate; rays exit toward t = -half_extent
        t = -centers[:, 0] * b + centers[:, 1] * a
        damp = geom.decay * np.exp(-geom.attenuation * (t + half_extent))
        below = [_halfplane_area(x0, y0, h, a, b, c) for c in edges]
        rows_k = []
        for i in range(geom.n_bins):
            vals = (below[i + 1] - below[i]) / width * damp
            vals[vals < 1e-14] = 0.0
            rows_k.append(sp.csr_matrix(vals))
        return sp.vstack(rows_k)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            blocks = list(ex.map(one_angle, range(geom.n_angles)))
    else:
        blocks = [one_angle(k) for k in range(geom.n_angles)]
    A = sp.vstack(blocks).tocsr()
    if A.nnz == 0:
        raise GeometryError("no ray intersects the pixel grid")
    return A


def disk_phantom(geom: SpectGeometry, background=1.0, hot=3.0, cold=0.0,
                 disk_radius=0.42, hot_center=(0.18, 0.18), hot_radius=0.14,
                 cold_center=(-0.2, -0.12), cold_radius=0.12):
    """Piecewise-constant phantom: warm disk, hot spot, zero-intensity cold spot.

    Radii and centres are fractions of the grid extent.  Pixels outside the
    main disk are exactly zero, so edge rays see no activity and the dark
    exterior ring is informed only by zero counts.
    """
    centers = geom.pixel_centers()
    extent = max(geom.rows, geom.cols) * geom.pixel_size
    r = np.hypot(centers[:, 0], centers[:, 1])
    theta = np.zeros(geom.p)
    theta[r <= disk_radius * extent] = background
    d_hot = np.hypot(centers[:, 0] - hot_center[0] * extent, centers[:, 1] - hot_center[1] * extent)
    theta[(d_hot <= hot_radius * extent) & (theta > 0)] = hot
    d_cold = np.hypot(centers[:, 0] - cold_center[0] * extent, centers[:, 1] - cold_center[1] * extent)
    theta[(d_cold <= cold_radius * extent) & (r <= disk_radius * extent)] = cold
    return theta


@dataclass(eq=False)
class SpectInstance:
    """A simulated (or loaded) scan: matrix, counts, prior, and provenance."""

    geometry: SpectGeometry
    A: sp.csr_matrix
    counts: np.ndarray          # integer photon counts, length n
    prior: object = None
    theta_true: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (self.A.shape[0],):
            raise DimensionError("counts length does not match the system matrix")
        if self.prior is None:
            self.prior = default_prior(self.geometry)

    @property
    def y(self):
        """Observed rates: counts divided by the exposure."""
        return self.counts / self.geometry.exposure

    @property
    def sigma(self):
        return self.geometry.sigma

    def model(self) -> PoissonGLM:
        return PoissonGLM(self.A, self.y, exposure=self.geometry.exposure)

    def save(self, directory):
        """Directory layout: geometry+seed JSON, matrix triplet CSV, counts CSV."""
        from pathlib import Path
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = {"geometry": self.geometry.to_dict(), "seed": self.seed,
                "prior": getattr(self.prior, "kind", None),
                "prior_params": _prior_params(self.prior)}
        (d / "instance.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        coo = self.A.tocoo()
        np.savetxt(d / "matrix.csv", np.column_stack([coo.row, coo.col, coo.data]),
                   fmt=["%d", "%d", "%.17g"], delimiter=",", header="row,col,value")
        np.savetxt(d / "counts.csv", self.counts, fmt="%.17g", header="count")
        if self.theta_true is not None:
            np.savetxt(d / "theta_true.csv", self.theta_true, fmt="%.17g", header="theta")

    @classmethod
    def load(cls, directory):
        from pathlib import Path
        d = Path(directory)
        meta = json.loads((d / "instance.json").read_text())
        geom = SpectGeometry.from_dict(meta["geometry"])
        trip = np.loadtxt(d / "matrix.csv", delimiter=",", ndmin=2)
        A = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                          shape=(geom.n, geom.p))
        counts = np.loadtxt(d / "counts.csv", ndmin=1)
        tt = d / "theta_true.csv"
        theta_true = np.loadtxt(tt, ndmin=1) if tt.exists() else None
        prior = _prior_from_meta(meta, geom)
        return cls(geom, A, counts, prior=prior, theta_true=theta_true, seed=meta.get("seed"))


def _prior_params(prior):
    if isinstance(prior, LogCoshMRFPrior):
        return {"gamma": prior.gamma, "zeta": prior.zeta}
    if isinstance(prior, PowerLawPrior):
        return {"alphas": prior.alphas.tolist()}
    return None


def _prior_from_meta(meta, geom):
    kind = meta.get("prior")
    params = meta.get("prior_params") or {}
    if kind == "LogCoshMRF":
        return LogCoshMRFPrior(grid_edges(geom.rows, geom.cols), **params)
    if kind == "PowerLaw":
        return PowerLawPrior(np.asarray(params["alphas"]))
    return default_prior(geom)


def default_prior(geom: SpectGeometry, gamma=25.0, zeta=8.0):
    """Log cosh pairwise-difference field on the 4-neighbour pixel graph."""
    return LogCoshMRFPrior(grid_edges(geom.rows, geom.cols), gamma=gamma, zeta=zeta)


def simulate(geom: SpectGeometry, theta_true, rng, A=None, prior=None, n_jobs=1) -> SpectInstance:
    """Draw ``exposure * Y_i ~ Poisson(exposure * A_i theta_true)`` independently."""
    rng = check_rng(rng)
    theta_true = check_theta(theta_true, geom.p, name="theta_true")
    if A is None:
        A = build_system_matrix(geom, n_jobs=n_jobs)
    lam = geom.exposure * (A @ theta_true)
    counts = rng.poisson(lam).astype(float)
    return SpectInstance(geom, A, counts, prior=prior, theta_true=theta_true)


# --------------------------------------------------------------------------
# MAP estimation
# --------------------------------------------------------------------------

def _projected_grad_norm(theta, grad, tol_zero=0.0):
    pg = np.where(theta > tol_zero, np.abs(grad), np.maximum(grad, 0.0))
    return float(np.max(pg, initial=0.0))


def _projection_residual(theta, grad):
    # |theta - P(theta + grad)|_inf: tolerant of tiny positives driven to 0
    return float(np.max(np.abs(theta - np.maximum(theta + grad, 0.0)), initial=0.0))


def map_estimate(inst: SpectInstance, tol=1e-8, max_iter=5000, method="pg",
                 theta_init=None, prior=None):
    """Posterior mode by projected gradient ascent with Armijo backtracking.

    ``method="em"`` runs the classical multiplicative EM update instead and is
    only valid for a flat prior.  Convergence: every strictly positive
    coordinate has |kernel gradient| <= tol and every zero coordinate has
    gradient <= tol (KKT conditions for the orthant constraint).
    Raises ``NonconvergenceError`` carrying the last iterate otherwise.
    """
    prior = prior if prior is not None else inst.prior
    model = inst.model()
    n, p = inst.A.shape
    T = inst.geometry.exposure
    counts = inst.counts
    A = inst.A
    colsum = np.asarray(A.sum(axis=0)).ravel()

    if theta_init is None:
        total = counts.sum() / T
        denom = float(colsum.sum())
        theta = np.full(p, max(total / max(denom, 1e-300), 1e-6))
    else:
        theta = check_theta(theta_init, p).copy()

    if method == "em":
        # classical multiplicative update; converges sublinearly near the
        # boundary, so suitable for loose tolerances only
        if not (isinstance(prior, PowerLawPrior) and np.all(prior.exponents(p) == 1.0)):
            raise DomainError("EM updates are available only under a flat prior")
        if np.any(colsum <= 0):
            raise DomainError("EM requires all column sums positive")
        for it in range(max_iter):
            mu = A @ theta
            ratio = np.where(counts > 0, counts / np.maximum(T * mu, 1e-300), 0.0)
            theta = theta / colsum * (A.T @ ratio)
            if it % 25 == 0:
                grad = _kernel_grad(model, prior, theta)
                if _projection_residual(theta, grad) <= tol:
                    return theta
        grad = _kernel_grad(model, prior, theta)
        if _projection_residual(theta, grad) <= tol:
            return theta
        raise NonconvergenceError("EM did not reach tolerance", last=theta)

    def kernel(th):
        try:
            return log_posterior_kernel(model, prior, th)
        except DomainError:
            return -np.inf

    # Phase 1, spectral projected gradient: Barzilai-Borwein step sizes with a
    # nonmonotone Armijo backtracking line search.  Kernel-value comparisons
    # lose resolution near the optimum, so phase 2 polishes with projected
    # Newton steps judged on the projected-gradient norm alone.
    lam_min, lam_max, memory = 1e-12, 1e12, 10
    f = kernel(theta)
    grad = _kernel_grad(model, prior, theta)
    lam = 1.0 / max(np.max(np.abs(grad)), 1e-8)
    recent = [f]
    for _ in range(max_iter):
        if _projected_grad_norm(theta, grad) <= tol:
            return theta
        s = lam
        accepted = False
        for _ in range(60):
            cand = np.maximum(theta + s * grad, 0.0)
            d = cand - theta
            if not np.any(d):
                break
            fc = kernel(cand)
            if np.isfinite(fc) and fc >= max(recent) + 1e-4 * float(grad @ d):
                accepted = True
                break
            s *= 0.25
        if not accepted:
            break
        grad_new = _kernel_grad(model, prior, cand)
        step_diff = cand - theta
        curve = float(step_diff @ (grad - grad_new))
        lam = min(lam_max, max(lam_min, float(step_diff @ step_diff) / curve)) if curve > 0 \
            else lam_max
        theta, f, grad = cand, fc, grad_new
        recent.append(f)
        if len(recent) > memory:
            recent.pop(0)

    theta = _projected_newton_polish(model, prior, theta, tol, rounds=60)
    if _projected_grad_norm(theta, _kernel_grad(model, prior, theta)) <= tol:
        return theta
    raise NonconvergenceError("projected gradient did not reach tolerance", last=theta)


def _projected_newton_polish(model, prior, theta, tol, rounds=60):
    """Newton steps on the inactive set, accepted when the KKT residual drops."""
    theta = theta.copy()
    s2 = model.sigma ** 2
    grad = _kernel_grad(model, prior, theta)
    best = _projected_grad_norm(theta, grad)
    for _ in range(rounds):
        if best <= tol:
            return theta
        free = np.flatnonzero((theta > 1e-14) | (grad > 0))
        if free.size == 0:
            return theta
        H = model.hessian(theta) / s2
        try:
            H = H + prior.hess_log_density(theta)
        except NotImplementedError:
            pass
        Hff = H[np.ix_(free, free)]
        try:
            d = np.linalg.solve(Hff - 1e-12 * np.eye(free.size), grad[free])
        except np.linalg.LinAlgError:
            return theta
        improved = False
        t = 1.0
        for _ in range(25):
            cand = theta.copy()
            cand[free] = np.maximum(theta[free] - t * d, 0.0)
            try:
                g_new = _kernel_grad(model, prior, cand)
            except DomainError:
                t *= 0.5
                continue
            res = _projected_grad_norm(cand, g_new)
            if res < best:
                theta, grad, best = cand, g_new, res
                improved = True
                break
            t *= 0.5
        if not improved:
            return theta
    return theta


def _kernel_grad(model, prior, theta):
    return model.gradient(theta) / model.sigma ** 2 + prior.grad_log_density(theta)


# --------------------------------------------------------------------------
# Plug-in approximate posterior
# --------------------------------------------------------------------------

@dataclass(eq=False)
class PluginApprox:
    """Estimated index sets and local curvature built from the posterior mode.

    ``nonregular`` pixels have negative data score at ``theta_hat`` (bounded
    by zero counts); ``regular`` is the complement, with ``regular_boundary``
    the regular pixels estimated exactly at zero.  ``information`` and
    ``rates`` are the plug-in curvature and slope:
    ``information = sum_{i not in zero_rays} (y_i / yhat_i^2) a_i a_i^T`` on
    the regular block, ``rates = sum_{i in zero_rays} A[i, nonregular]``.
    """

    theta_hat: np.ndarray
    nonregular: np.ndarray
    regular: np.ndarray
    regular_boundary: np.ndarray
    zero_rays: np.ndarray
    information: np.ndarray
    rates: np.ndarray
    sigma: float

    @property
    def p(self):
        return self.theta_hat.size

    def information_inv(self):
        return np.linalg.inv(self.information)

    def to_dict(self):
        return {"theta_hat": self.theta_hat.tolist(),
                "nonregular": self.nonregular.tolist(),
                "regular": self.regular.tolist(),
                "regular_boundary": self.regular_boundary.tolist(),
                "zero_rays": self.zero_rays.tolist(),
                "information": self.information.tolist(),
                "rates": self.rates.tolist(),
                "sigma": self.sigma}


def plugin_approx(inst: SpectInstance, theta_hat, eps=0.0, zero_tol=1e-12) -> PluginApprox:
    """Classify pixels at the mode and assemble the plug-in curvature.

    ``eps >= 0`` widens the score test for the nonregular set (pixels with
    score below ``-eps``); the default 0 mirrors the raw definition and the
    sensitivity sweep lives in the command-line layer.
    """
    theta_hat = check_theta(theta_hat, inst.geometry.p, name="theta_hat")
    model = inst.model()
    yhat = inst.A @ theta_hat
    zero_rays = np.flatnonzero(yhat <= zero_tol)
    grad = model.gradient(theta_hat)
    nonregular = np.flatnonzero(grad < -float(eps))
    regular = np.setdiff1d(np.arange(inst.geometry.p), nonregular)
    regular_boundary = regular[theta_hat[regular] <= zero_tol]

    nz = np.setdiff1d(np.arange(inst.A.shape[0]), zero_rays)
    Areg = inst.A[nz][:, regular]
    w = inst.y[nz] / np.square(yhat[nz])
    info = np.asarray((Areg.T @ Areg.multiply(w[:, None])).todense()) if sp.issparse(Areg) \
        else (Areg.T * w) @ Areg
    info = 0.5 * (info + info.T)
    rates = np.asarray(inst.A[zero_rays][:, nonregular].sum(axis=0)).ravel()
    try:
        np.linalg.cholesky(info + 0.0)
    except np.linalg.LinAlgError:
        eigval, eigvec = np.linalg.eigh(info)
        worst = np.argsort(-np.abs(eigvec[:, 0]))[:5]
        raise SingularInformationError(
            "plug-in information is singular; most collinear regular pixels: "
            f"{regular[worst].tolist()}")
    return PluginApprox(theta_hat, nonregular, regular, regular_boundary, zero_rays,
                        info, rates, inst.sigma)


def plugin_logdensity(pa: PluginApprox, z, sigma=None):
    """Log of the approximate posterior density of ``z = theta - theta_hat``.

    The Gaussian block is quadratic in ``z[regular]`` with matrix
    ``information / sigma**2``; the nonregular block is linear with slopes
    ``rates / sigma**2`` on the support ``z >= -theta_hat``.  The constant is
    the product-form normalizer from the plug-in display; when some regular
    pixel sits exactly at zero the Gaussian block is renormalized on the
    truncated support by quadrature or sampling instead (see
    ``plugin_log_normalizer``).
    """
    sigma = pa.sigma if sigma is None else float(sigma)
    _require_positive_rates(pa)
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != pa.p:
        raise DimensionError(f"z has dimension {z.shape[1]}, expected {pa.p}")
    s2 = sigma ** 2
    const = plugin_log_normalizer(pa, sigma)
    z0 = z[:, pa.regular]
    z1 = z[:, pa.nonregular]
    out = const - 0.5 * np.einsum("ij,jk,ik->i", z0, pa.information, z0) / s2 \
        - (z1 @ pa.rates) / s2
    bad = np.any(z1 < -pa.theta_hat[pa.nonregular] - 1e-300, axis=1)
    if pa.regular_boundary.size:
        rb_cols = np.searchsorted(pa.regular, pa.regular_boundary)
        bad |= np.any(z0[:, rb_cols] < 0.0, axis=1)
    out = np.where(bad, -np.inf, out)
    return float(out[0]) if single else out


def plugin_log_normalizer(pa: PluginApprox, sigma=None):
    """Log normalizing constant of the plug-in density.

    With no regular pixel at zero this is the display constant
    ``sum_j log(rates_j / (2 sigma^2)) - (p0/2) log(2 pi sigma^2)
    + log det(information) / 2``; otherwise the Gaussian factor is replaced by
    the reciprocal of the truncated-Gaussian normalizer.
    """
    sigma = pa.sigma if sigma is None else float(sigma)
    s2 = sigma ** 2
    p0 = pa.regular.size
    out = float(np.sum(np.log(pa.rates / (2.0 * s2)))) if pa.rates.size else 0.0
    if pa.regular_boundary.size == 0:
        sign, logdet = np.linalg.slogdet(pa.information)
        if sign <= 0:
            raise SingularInformationError("plug-in information has nonpositive determinant")
        return out - 0.5 * p0 * np.log(2 * np.pi * s2) + 0.5 * logdet
    from .limitdist import TiltedNormal

    order = np.concatenate([np.setdiff1d(pa.regular, pa.regular_boundary), pa.regular_boundary])
    cols = np.searchsorted(pa.regular, order)
    info = pa.information[np.ix_(cols, cols)] / s2
    tn = TiltedNormal(np.zeros(p0), info, pa.regular_boundary.size)
    method = "quadrature" if p0 <= 3 else "mc"
    val, _ = tn.normalizer(method=method, rng=np.random.default_rng(0))
    return out - np.log(val)


def _require_positive_rates(pa: PluginApprox):
    if pa.rates.size and pa.rates.min() <= 0.0:
        bad = pa.nonregular[pa.rates <= 0.0]
        raise DomainError(
            f"{bad.size} nonregular pixels have zero plug-in rate (no zero-count ray covers "
            f"them), e.g. {bad[:5].tolist()}; these are score-threshold artifacts, rerun the "
            f"classification with a positive eps")


def plugin_sample(pa: PluginApprox, rng, size):
    """Draws of ``z = theta - theta_hat`` from the plug-in approximation."""
    from .limitdist import LimitMeasure, TiltedNormal

    _require_positive_rates(pa)
    rng = check_rng(rng)
    interior = np.setdiff1d(pa.regular, pa.regular_boundary)
    order = np.concatenate([interior, pa.regular_boundary])
    cols = np.searchsorted(pa.regular, order)
    info = pa.information[np.ix_(cols, cols)]
    tn = TiltedNormal(np.zeros(order.size), info / pa.sigma ** 2, pa.regular_boundary.size)
    out = np.empty((size, pa.p))
    if order.size:
        out[:, order] = tn.sample(rng, size)
    if pa.nonregular.size:
        scale = pa.sigma ** 2 / pa.rates
        out[:, pa.nonregular] = rng.exponential(1.0, size=(size, pa.rates.size)) * scale
        out[:, pa.nonregular] -= pa.theta_hat[pa.nonregular]
    return out


# --------------------------------------------------------------------------
# Fast single-site posterior evaluator for the Metropolis sampler
# --------------------------------------------------------------------------

class SpectPosterior:
    """Log posterior of a scan with O(column) single-coordinate updates.

    Implements the single-site protocol consumed by the chain runner: a state
    caches ``mu = A theta`` so that changing one pixel touches only the rays
    through it and the pixel's 4-neighbour prior terms.
    """

    def __init__(self, inst: SpectInstance, prior=None):
        self.inst = inst
        self.prior = prior if prior is not None else inst.prior
        self.p = inst.geometry.p
        self.T = inst.geometry.exposure
        self.counts = inst.counts
        self.A_csc = sp.csc_matrix(inst.A)
        self.colsum = np.asarray(inst.A.sum(axis=0)).ravel()
        self._model = inst.model()
        if isinstance(self.prior, LogCoshMRFPrior):
            e = self.prior.edges
            self._neighbours = [np.concatenate([e[e[:, 0] == j, 1], e[e[:, 1] == j, 0]])
                                for j in range(self.p)]
        else:
            self._neighbours = None

    def logpdf(self, theta):
        from .families import log_posterior_kernel
        return log_posterior_kernel(self._model, self.prior, theta)

    def _loglik_terms(self, mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(self.counts > 0, self.counts * np.log(np.maximum(mu, 1e-300)), 0.0)
        if np.any((self.counts > 0) & (mu <= 0)):
            return -np.inf
        return float(lg.sum())

    def make_state(self, theta):
        theta = np.asarray(theta, dtype=float).copy()
        mu = self.A_csc @ theta
        return {"theta": theta, "mu": mu}

    def _col(self, j):
        sl = slice(self.A_csc.indptr[j], self.A_csc.indptr[j + 1])
        return self.A_csc.indices[sl], self.A_csc.data[sl]

    def delta_logpdf(self, state, j, new_value):
        theta = state["theta"]
        old = theta[j]
        rows, vals = self._col(j)
        mu_old = state["mu"][rows]
        mu_new = np.maximum(mu_old + vals * (new_value - old), 0.0)
        cnt = self.counts[rows]
        pos = cnt > 0
        if np.any(pos & (mu_new <= 0)):
            return -np.inf, (rows, mu_new)
        with np.errstate(divide="ignore"):
            d_lik = float(np.sum(cnt[pos] * (np.log(mu_new[pos]) - np.log(mu_old[pos]))))
        d_lik -= self.T * self.colsum[j] * (new_value - old)
        d_prior = self._local_prior(theta, j, new_value) - self._local_prior(theta, j, old)
        return d_lik + d_prior, (rows, mu_new)

    def _local_prior(self, theta, j, value):
        if self._neighbours is not None:
            d = (value - theta[self._neighbours[j]]) / self.prior.zeta
            ax = np.abs(d)
            logcosh = ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)
            return float(-self.prior._coef * logcosh.sum())
        th = theta.copy()
        th[j] = value
        return self.prior.log_density(th)

    def commit(self, state, j, new_value, aux):
        rows, mu_new = aux
        state["theta"][j] = new_value
        state["mu"][rows] = mu_new

    def refresh(self, state):
        state["mu"] = self.A_csc @ state["theta"]
