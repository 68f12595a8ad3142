"""Input validation helpers used at API boundaries."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError, DomainError


def check_theta(theta, p=None, name="theta"):
    """Validate a parameter point: 1-d, finite, nonnegative coordinates.

    Returns a float64 copy. ``p`` pins the expected dimension.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = theta.reshape(1)
    if theta.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {theta.shape}")
    if p is not None and theta.shape[0] != p:
        raise DimensionError(f"{name} has length {theta.shape[0]}, expected {p}")
    if not np.all(np.isfinite(theta)):
        raise DomainError(f"{name} contains non-finite entries")
    if np.any(theta < 0):
        j = int(np.argmin(theta))
        raise DomainError(f"{name}[{j}] = {theta[j]} is negative; the parameter space is the nonnegative orthant")
    return theta


def check_vector(x, n=None, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite entries")
    return x


def check_matrix(A, shape=None, nonnegative=False, name="A"):
    """Validate a dense or sparse 2-d matrix; sparse input is converted to CSR."""
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        data = A.data
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise DimensionError(f"{name} must be 2-d, got shape {A.shape}")
        data = A
    if shape is not None and A.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {A.shape}, expected {tuple(shape)}")
    if data.size and not np.all(np.isfinite(data if not sp.issparse(A) else A.data)):
        raise DomainError(f"{name} contains non-finite entries")
    if nonnegative and data.size and (A.data if sp.issparse(A) else A).min() < 0:
        raise DomainError(f"{name} must be elementwise nonnegative")
    return A


def check_spd(M, name="matrix"):
    """Symmetrize and Cholesky-check a matrix; returns (M_sym, cholesky_factor)."""
    from .exceptions import SingularInformationError

    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    M = 0.5 * (M + M.T)
    if M.shape[0] == 0:
        return M, np.zeros((0, 0))
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(
            f"{name} is not positive definite; enlarge the model or merge collinear columns"
        ) from exc
    return M, L


def check_rng(rng):
    """Accept a Generator, a seed, or None (fresh nondeterministic Generator)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_index_sets(p, *sets):
    """Validate that the given index tuples partition range(p)."""
    seen = []
    for s in sets:
        seen.extend(int(j) for j in s)
    if sorted(seen) != list(range(p)):
        raise DimensionError(f"index sets {sets} do not partition range({p})")
