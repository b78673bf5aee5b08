"""Data preconditioning for complete (non-orthogonal) dictionaries.

``precondition`` maps ``Y = A0 X0`` to ``sqrt(p theta) (Y Y^T)^{-1/2} Y``,
which behaves like ``U V^T X0`` for ``A0 = U S V^T``: an orthogonal
dictionary plus a perturbation that shrinks as ``p`` grows.
``perturbation_norm`` measures that perturbation when the factors are known.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from dlsphere.errors import (
    ContractViolation,
    DiagnosticUnavailable,
    ParameterError,
    SingularInputError,
)

DEFAULT_EPS_CLAMP = 1e-12


@dataclass
class PreconditionedData:
    ybar: np.ndarray
    clamp_count: int
    theta_used: float


def inv_sqrt_psd(m, eps_clamp=DEFAULT_EPS_CLAMP):
    """Inverse square root of a symmetric PSD matrix.

    Eigenvalues below ``eps_clamp * lambda_max`` are floored to that value
    before inversion. Returns ``(m^{-1/2}, clamp_count)``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > 1e-10 * scale:
        raise ContractViolation("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (m + m.T))
    lam_max = evals[-1]
    if not lam_max > 0:
        raise SingularInputError("matrix has no positive eigenvalue")
    floor = eps_clamp * lam_max
    clamped = evals < floor
    count = int(np.count_nonzero(clamped))
    evals = np.where(clamped, floor, evals)
    out = (evecs / np.sqrt(evals)) @ evecs.T
    return 0.5 * (out + out.T), count


def precondition(y, theta, eps_clamp=DEFAULT_EPS_CLAMP):
    """``ybar = sqrt(p theta) (Y Y^T)^{-1/2} Y``.

    Clamped eigenvalues are reported through ``clamp_count`` and a warning;
    a Gram matrix with a non-positive eigenvalue is rejected outright.
    """
    y = np.asarray(y, dtype=float)
    n, p = y.shape
    if p < n:
        raise ParameterError(f"need p >= n, got n={n}, p={p}")
    if not 0 < theta <= 1:
        raise ParameterError(f"theta must lie in (0, 1], got {theta}")
    gram = y @ y.T
    gram = 0.5 * (gram + gram.T)
    evals = np.linalg.eigvalsh(gram)
    if not evals[0] > n * np.finfo(float).eps * max(evals[-1], 0.0):
        raise SingularInputError("Y Y^T is rank deficient")
    root, count = inv_sqrt_psd(gram, eps_clamp)
    if count:
        warnings.warn(f"precondition: {count} eigenvalue(s) of Y Y^T clamped", RuntimeWarning, stacklevel=2)
    ybar = math.sqrt(p * theta) * (root @ y)
    return PreconditionedData(ybar=ybar, clamp_count=count, theta_used=float(theta))


def spectral_norm(m, iters=50, tol=1e-8):
    """Largest singular value by power iteration on ``m^T m``.

    Starts from a fixed vector so the result is reproducible.
    """
    m = np.asarray(m, dtype=float)
    k = m.shape[1]
    v = np.cos(np.arange(1, k + 1))  # deterministic, generic start
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        u = m @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = m.T @ (u / nu)
        new = float(np.linalg.norm(v))
        v /= new if new > 0 else 1.0
        if abs(new - sigma) <= tol * max(new, 1e-300):
            sigma = new
            break
        sigma = new
    return sigma


def perturbation_norm(ybar, a0, x0):
    """Spectral norm of the measured perturbation ``Xi`` in ``ybar = (U V^T + Xi) x0``.

    ``Xi`` is recovered as ``(ybar - U V^T x0) x0^+`` with the pseudoinverse
    applied by least squares, which matches the factor-level definition only
    when ``x0`` has full row rank.
    """
    ybar = np.asarray(ybar, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = a0.shape[0]
    if a0.shape != (n, n) or x0.shape[0] != n or ybar.shape != (n, x0.shape[1]):
        raise ParameterError("dimension mismatch in perturbation_norm")
    u, s, vt = np.linalg.svd(a0)
    if not s[-1] > 0:
        raise ParameterError("a0 is singular")
    if np.linalg.matrix_rank(x0) < n:
        raise DiagnosticUnavailable("x0 is rank deficient; Xi is not identifiable")
    resid = ybar - (u @ vt) @ x0
    xi_t, *_ = np.linalg.lstsq(x0.T, resid.T, rcond=None)
    return spectral_norm(xi_t.T)
