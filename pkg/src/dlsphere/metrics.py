"""Recovery quality modulo signed permutations, and derivative checks."""

from dataclasses import dataclass

import numpy as np

from dlsphere.errors import NumericalFailure, ParameterError


def hungarian(cost):
    """Minimum-cost assignment for a square cost matrix.

    Shortest-augmenting-path Hungarian method with row/column potentials,
    O(n^3). Returns ``cols`` with row ``i`` assigned to column ``cols[i]``.
    Ties are resolved toward the lowest column index.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n != m:
        raise ParameterError("hungarian expects a square cost matrix")
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=int)  # match[j] = row (1-based) owning column j
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    cols = np.empty(n, dtype=int)
    for j in range(1, m + 1):
        cols[match[j] - 1] = j - 1
    return cols


@dataclass
class Alignment:
    """Signed permutation taking ``a_hat`` onto ``a0``.

    Column ``i`` of the aligned estimate is ``signs[i] * a_hat[:, perm[i]]``.
    """

    perm: np.ndarray
    signs: np.ndarray
    error_fro: float
    per_atom_dist: np.ndarray

    def apply(self, a_hat):
        return np.asarray(a_hat)[:, self.perm] * self.signs

    def to_dict(self):
        return {
            "perm": [int(k) for k in self.perm],
            "signs": [int(s) for s in self.signs],
            "error_fro": float(self.error_fro),
            "per_atom_dist": [float(d) for d in self.per_atom_dist],
        }


def _unit_columns(a):
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0] = 1.0
    return a / norms


def signed_perm_align(a_hat, a0, normalize=True):
    """Best signed permutation of ``a_hat``'s columns onto ``a0``.

    Columns are scaled to unit norm first (recovery is only defined up to
    scale) unless ``normalize=False``. The permutation maximizes
    ``sum_i |<a_hat[:, perm[i]], a0[:, i]>|``.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    if a_hat.ndim != 2 or a_hat.shape != a0.shape or a0.shape[0] != a0.shape[1]:
        raise ParameterError(f"shape mismatch: a_hat {a_hat.shape}, a0 {a0.shape}")
    if normalize:
        a_hat = _unit_columns(a_hat)
        a0 = _unit_columns(a0)
    ip = a0.T @ a_hat  # ip[i, j] = <a0_i, a_hat_j>
    perm = hungarian(-np.abs(ip))
    matched = ip[np.arange(a0.shape[1]), perm]
    signs = np.where(matched < 0, -1.0, 1.0)
    aligned = a_hat[:, perm] * signs
    diff = aligned - a0
    err = float(np.linalg.norm(diff) / np.linalg.norm(a0))
    return Alignment(perm=perm, signs=signs.astype(int), error_fro=err, per_atom_dist=np.linalg.norm(diff, axis=0))


def recovery_error(a_hat, a0, normalize=True):
    return signed_perm_align(a_hat, a0, normalize=normalize).error_fro


def _finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericalFailure(f"non-finite {what} in derivative check")
    return x


def grad_check(f, grad, point, step=1e-6):
    """Worst central-difference discrepancy of ``grad`` against ``f``.

    The discrepancy is ``max_i |fd_i - grad_i|`` divided by ``max_i |grad_i|``
    (floored at 1e-12), i.e. relative to the gradient's scale.
    """
    if not step > 0:
        raise ParameterError("step must be positive")
    x = np.asarray(point, dtype=float)
    g = _finite(np.asarray(grad(x), dtype=float), "gradient")
    fd = np.empty_like(g)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (f(x + e) - f(x - e)) / (2 * step)
    _finite(fd, "function value")
    return float(np.max(np.abs(fd - g)) / max(float(np.max(np.abs(g))), 1e-12))


def jacobian_check(grad, hess, point, step=1e-6):
    """Like :func:`grad_check`, differencing ``grad`` to check ``hess``."""
    if not step > 0:
        raise ParameterError("step must be positive")
    x = np.asarray(point, dtype=float)
    h = _finite(np.asarray(hess(x), dtype=float), "Hessian")
    fd = np.empty_like(h)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fd[:, i] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * step)
    _finite(fd, "gradient")
    return float(np.max(np.abs(fd - h)) / max(float(np.max(np.abs(h))), 1e-12))
