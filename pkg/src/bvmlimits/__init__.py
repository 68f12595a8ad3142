"""Limit posteriors for models whose true parameter sits on the orthant boundary.

The rescaled posterior of such a model converges to a product of a
polynomially-tilted truncated Gaussian (regular block) and independent Gamma
coordinates (nonregular block).  This package builds, samples and validates
that limit, provides a photon-count tomography test-bed with a plug-in
approximate posterior, and cross-checks everything against a reference
Metropolis sampler and nonasymptotic total-variation bounds.
"""

__version__ = "0.1.0"

from .boundary import (BoundaryPartition, LocalExpansion, ScalingTransform, classify,
                       local_quadratic, sandwich_check)
from .estimator import PoissonBoundaryPosterior
from .families import (Binomial, CustomFamily, MixedEffects, PoissonGLM,
                       eval_gradient, eval_hessian, eval_limit_loglik,
                       eval_scaled_loglik, log_posterior_kernel, make_prior)
from .limitdist import (LimitMeasure, TiltedNormal, gamma_quantile, gamma_tail,
                        limit_logdensity, limit_sample)
from .mcmc import ChainConfig, ChainOutput, marginal_mode, marginal_moments, run_chain
from .spect import (SpectGeometry, SpectInstance, build_system_matrix, disk_phantom,
                    map_estimate, plugin_approx, plugin_logdensity, simulate)

__all__ = [
    "BoundaryPartition", "LocalExpansion", "ScalingTransform", "classify",
    "local_quadratic", "sandwich_check", "PoissonBoundaryPosterior", "Binomial",
    "CustomFamily", "MixedEffects", "PoissonGLM", "eval_gradient", "eval_hessian",
    "eval_limit_loglik", "eval_scaled_loglik", "log_posterior_kernel", "make_prior",
    "LimitMeasure", "TiltedNormal", "gamma_quantile", "gamma_tail", "limit_logdensity",
    "limit_sample", "ChainConfig", "ChainOutput", "marginal_mode", "marginal_moments",
    "run_chain", "SpectGeometry", "SpectInstance", "build_system_matrix", "disk_phantom",
    "map_estimate", "plugin_approx", "plugin_logdensity", "simulate", "__version__",
]
