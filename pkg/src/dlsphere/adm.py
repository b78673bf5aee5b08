"""Alternating minimization baseline for orthobasis dictionary learning.

Solves ``min lam |X|_1 + 0.5 |A X - Y|_F^2`` over orthogonal ``A`` by
alternating the two exact block minimizers

    X = S_lam[A^T Y],    A = polar(Y X^T),

and reports the ``|A^T Y|_1`` score used to compare restarts.
"""

from dataclasses import dataclass, field

import numpy as np

from dlsphere import _kernels
from dlsphere.errors import DegenerateInputError, ParameterError
from dlsphere.model import child_seed, haar_orthogonal, make_rng

DEFAULT_MAX_ITERS = 10_000
DEFAULT_TOL = 1e-8
TRIVIAL_WARNING = "trivial solution: soft-thresholding zeroed every coefficient"


def soft_threshold(m, lam):
    """Elementwise ``sign(m) * max(|m| - lam, 0)``."""
    if not lam >= 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    return _kernels.soft_threshold(np.asarray(m, dtype=float), float(lam))


def polar_factor(m):
    """Orthogonal factor ``U V^T`` of the SVD ``m = U D V^T``.

    Each singular pair is sign-normalized so the largest-magnitude entry of
    the left vector is positive. ``U V^T`` does not depend on that choice,
    but pinning it keeps the intermediate factors reproducible.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"polar_factor expects a square matrix, got {m.shape}")
    if not np.any(m):
        raise DegenerateInputError("polar factor of the zero matrix is undefined")
    u, _, vt = np.linalg.svd(m)
    idx = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[idx, np.arange(u.shape[1])])
    s[s == 0] = 1.0
    return (u * s) @ (vt * s[:, None])


def adm_objective(a, x, y, lam):
    return float(lam * np.abs(x).sum() + 0.5 * np.linalg.norm(a @ x - y) ** 2)


def l1_score(a, y):
    return float(np.abs(a.T @ y).sum())


@dataclass
class AdmResult:
    a: np.ndarray
    x: np.ndarray
    objective_trace: list
    l1_score: float
    iterations: int
    converged: bool
    warning: str = None

    def to_dict(self, include_matrices=False):
        out = {
            "objective_trace": [float(v) for v in self.objective_trace],
            "l1_score": float(self.l1_score),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "warning": self.warning,
        }
        if include_matrices:
            out["a"] = self.a.tolist()
        return out


def adm_learn(y, lam, a_init=None, seed=None, max_iters=DEFAULT_MAX_ITERS, tol=DEFAULT_TOL):
    """Alternate the X- and A-steps from ``a_init`` (or a Haar draw from ``seed``).

    The first X-step is taken from the initial dictionary. The trace holds
    the objective after every full iteration, preceded by its value right
    after that first X-step. Iteration stops once ``|A_k - A_{k-1}|_F <= tol``.
    """
    y = np.asarray(y, dtype=float)
    if not lam > 0:
        raise ParameterError(f"lambda must be > 0, got {lam}")
    if not np.any(y):
        raise ParameterError("y must be nonzero")
    n = y.shape[0]
    if a_init is None:
        if seed is None:
            raise ParameterError("give either a_init or seed")
        a = haar_orthogonal(n, make_rng(seed))
    else:
        a = np.array(a_init, dtype=float)
        if a.shape != (n, n) or np.linalg.norm(a.T @ a - np.eye(n)) > 1e-8:
            raise ParameterError("a_init must be an n x n orthogonal matrix")
    x = soft_threshold(a.T @ y, lam)
    trace = [adm_objective(a, x, y, lam)]
    warning = None
    converged = False
    it = 0
    while it < max_iters:
        if not np.any(x):
            warning = TRIVIAL_WARNING
            converged = True
            break
        a_new = polar_factor(y @ x.T)
        x = soft_threshold(a_new.T @ y, lam)
        step = float(np.linalg.norm(a_new - a))
        a = a_new
        it += 1
        trace.append(adm_objective(a, x, y, lam))
        if step <= tol:
            converged = True
            break
    if warning is None and not np.any(x):
        warning = TRIVIAL_WARNING
    return AdmResult(a=a, x=x, objective_trace=trace, l1_score=l1_score(a, y), iterations=it, converged=converged, warning=warning)


@dataclass
class Dispersion:
    l1_scores: list
    relative_spread: float
    runs: list = field(default_factory=list)

    def to_dict(self):
        return {
            "l1_scores": [float(s) for s in self.l1_scores],
            "relative_spread": float(self.relative_spread),
            "runs": [r.to_dict() for r in self.runs],
        }


def dispersion_experiment(y, lam, restarts, max_iters=DEFAULT_MAX_ITERS, seed=0, init_seeds=None, tol=DEFAULT_TOL):
    """Run ``adm_learn`` from independent Haar inits; spread = (max - min) / median.

    Restart ``r`` draws its init from stream ``(seed, r)`` unless
    ``init_seeds`` lists the seeds explicitly.
    """
    if init_seeds is None:
        if restarts < 2:
            raise ParameterError("restarts must be >= 2")
        init_seeds = [child_seed(seed, r) for r in range(restarts)]
    elif len(init_seeds) < 2:
        raise ParameterError("need at least two init seeds")
    runs = [adm_learn(y, lam, seed=s, max_iters=max_iters, tol=tol) for s in init_seeds]
    scores = np.array([r.l1_score for r in runs])
    med = float(np.median(scores))
    spread = float((scores.max() - scores.min()) / med) if med > 0 else 0.0
    return Dispersion(l1_scores=scores.tolist(), relative_spread=spread, runs=runs)
