"""Small dense linear algebra: quadratic forms, outer products, Gaussian draws."""
import numpy as np

from .errors import ContractViolation, DegenerateCovarianceError

JITTER_ATTEMPTS = 3


def psd_tolerance(M):
    """Slack allowed below zero for a matrix that should be PSD."""
    return 1e-9 * (1.0 + abs(float(np.trace(M))))


def _as_square(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {M.shape}")
    return M


def _as_vector(v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ContractViolation(f"expected a vector, got shape {v.shape}")
    return v


def quadratic_form(M, v) -> float:
    M = _as_square(M)
    v = _as_vector(v)
    if M.shape[0] != v.shape[0]:
        raise ContractViolation(f"dimension mismatch: matrix {M.shape}, vector {v.shape}")
    return float(v @ (M @ v))


def outer_product(u, v) -> np.ndarray:
    u = _as_vector(u)
    v = _as_vector(v)
    if u.shape != v.shape:
        raise ContractViolation(f"dimension mismatch: {u.shape} vs {v.shape}")
    return np.multiply.outer(u, v)


def min_eigenvalue_bound(M) -> float:
    """Gershgorin lower bound on the smallest eigenvalue, clipped to the
    trivial bound ``min(diag)`` so that the bound never exceeds a diagonal entry.

    Every eigenvalue lies in some disc ``[M_ii - R_i, M_ii + R_i]`` with
    ``R_i`` the off-diagonal absolute row sum, hence ``min_i (M_ii - R_i)``.
    """
    M = _as_square(M)
    if M.size == 0:
        return 0.0
    diag = np.diag(M)
    radii = np.abs(M).sum(axis=1) - np.abs(diag)
    return float(np.min(diag - radii))


def psd_factor(cov):
    """Return ``L`` with ``L @ L.T == cov`` for a PSD ``cov``.

    Uses a symmetric eigendecomposition so rank-deficient matrices factor
    exactly (null directions stay null). Eigenvalues within the PSD tolerance
    below zero are clipped. If the matrix looks indefinite, a diagonal jitter
    of ``1e-10 * (1 + trace)`` is added and grown tenfold per retry.
    """
    cov = _as_square(cov)
    if not np.all(np.isfinite(cov)):
        raise DegenerateCovarianceError("covariance has non-finite entries")
    tol = psd_tolerance(cov)
    jitter = 1e-10 * (1.0 + abs(float(np.trace(cov))))
    work = cov
    for attempt in range(JITTER_ATTEMPTS + 1):
        try:
            evals, evecs = np.linalg.eigh(work)
        except np.linalg.LinAlgError:
            evals = None
        if evals is not None and evals.min(initial=0.0) >= -tol:
            return evecs * np.sqrt(np.clip(evals, 0.0, None))
        if attempt == JITTER_ATTEMPTS:
            break
        work = cov + jitter * np.eye(cov.shape[0])
        jitter *= 10.0
    raise DegenerateCovarianceError(
        f"covariance is not PSD within tolerance {tol:.3g} after {JITTER_ATTEMPTS} jitter retries"
    )


def mvn_sample(mean, cov, scale, rng_seed, count) -> np.ndarray:
    """``count`` i.i.d. draws from ``N(mean, scale * cov)`` as a ``(count, A)`` array.

    ``rng_seed`` may be an int or a sequence of ints (counter-based streams,
    e.g. ``[seed, sample_index]``).
    """
    mean = _as_vector(mean)
    cov = _as_square(cov)
    if cov.shape[0] != mean.shape[0]:
        raise ContractViolation(f"dimension mismatch: mean {mean.shape}, cov {cov.shape}")
    if scale < 0:
        raise ContractViolation(f"scale must be non-negative, got {scale}")
    if count < 0:
        raise ContractViolation(f"count must be non-negative, got {count}")
    L = psd_factor(cov) * np.sqrt(scale)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((count, mean.shape[0]))
    return mean + z @ L.T
