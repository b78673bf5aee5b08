"""Hot inner loops over data columns.

Two implementations of each kernel live here: a numba ``@njit`` loop and a
vectorized numpy expression. Both compute the same sums; they differ only in
floating-point summation order. ``sphere_derivs`` and ``soft_threshold`` are
bound to one of them according to :mod:`dlsphere._backend`.

The surrogate derivatives are written through ``e = exp(-2|z|/mu)``:

    h(z)       = |z| + mu * (log1p(e) - log 2)
    tanh(z/mu) = sign(z) * (1 - e) / (1 + e)
    sech^2     = 4 e / (1 + e)^2

which never overflows and avoids the cancellation in ``1 - tanh^2`` for
large ``|z|/mu``.
"""

import math

import numpy as np

from dlsphere import _backend

LOG2 = math.log(2.0)


def sphere_derivs_numpy(q, y, mu, order=2):
    """Value, gradient and Hessian of ``(1/p) sum_k h_mu(q . y_k)`` in R^n.

    ``order`` 0 returns ``(value, None, None)``; 1 adds the gradient; 2 adds
    the Hessian. Shapes: ``q`` (n,), ``y`` (n, p).
    """
    n, p = y.shape
    z = q @ y
    a = np.abs(z)
    e = np.exp(-2.0 * a / mu)
    value = float(np.sum(a + mu * (np.log1p(e) - LOG2)) / p)
    if order < 1:
        return value, None, None
    t = np.sign(z) * (1.0 - e) / (1.0 + e)
    grad = (y @ t) / p
    if order < 2:
        return value, grad, None
    s = 4.0 * e / ((1.0 + e) * (1.0 + e))
    hess = ((y * s) @ y.T) / (p * mu)
    hess = 0.5 * (hess + hess.T)
    return value, grad, hess


def soft_threshold_numpy(m, lam):
    return np.sign(m) * np.maximum(np.abs(m) - lam, 0.0)


if _backend.HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _sphere_derivs_nb(q, y, mu, order):
        # BLAS for the products with y, one fused scalar pass for the
        # transcendental per-column weights
        n, p = y.shape
        z = np.dot(q, y)
        value = 0.0
        t = np.empty(p)
        s = np.empty(p)
        for k in range(p):
            a = abs(z[k])
            e = math.exp(-2.0 * a / mu)
            value += a + mu * (math.log1p(e) - LOG2)
            if order < 1:
                continue
            r = 1.0 / (1.0 + e)
            th = (1.0 - e) * r
            if z[k] < 0.0:
                th = -th
            elif z[k] == 0.0:
                th = 0.0
            t[k] = th
            s[k] = 4.0 * e * r * r
        value /= p
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        if order >= 1:
            grad = np.dot(y, t) / p
        if order >= 2:
            ys = y * s
            hess = np.dot(ys, y.T) / (p * mu)
            hess = 0.5 * (hess + hess.T)
        return value, grad, hess

    @njit(cache=True)
    def _soft_threshold_nb(m, lam):
        out = np.empty_like(m)
        flat_in = m.reshape(-1)
        flat_out = out.reshape(-1)
        for k in range(flat_in.size):
            v = flat_in[k]
            if v > lam:
                flat_out[k] = v - lam
            elif v < -lam:
                flat_out[k] = v + lam
            else:
                flat_out[k] = 0.0
        return out

    def sphere_derivs_numba(q, y, mu, order=2):
        q = np.ascontiguousarray(q, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        value, grad, hess = _sphere_derivs_nb(q, y, float(mu), int(order))
        return value, (grad if order >= 1 else None), (hess if order >= 2 else None)

    def soft_threshold_numba(m, lam):
        return _soft_threshold_nb(np.ascontiguousarray(m, dtype=np.float64), float(lam))

else:  # pragma: no cover
    sphere_derivs_numba = None
    soft_threshold_numba = None


if _backend.USE_NUMBA:
    sphere_derivs = sphere_derivs_numba
    soft_threshold = soft_threshold_numba
else:
    sphere_derivs = sphere_derivs_numpy
    soft_threshold = soft_threshold_numpy
