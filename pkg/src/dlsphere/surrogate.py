"""Smoothed l1 surrogate and the sphere objective with its derivatives.

The objective is ``f(q; Y) = (1/p) sum_k h_mu(q . y_k)`` with
``h_mu(z) = mu log cosh(z / mu)``. Derivatives are available in three
coordinate systems:

* ambient R^n (``euclidean_*``),
* the tangent space of the sphere at ``q`` (``riemannian_*``),
* the chart ``q(w) = (w, sqrt(1 - |w|^2))`` over the ball Gamma (``g_*``).
"""

import math

import numpy as np

from dlsphere import _kernels
from dlsphere.errors import ContractViolation, OutOfChartError, ParameterError

DEFAULT_MU = 1e-2
TANGENT_TOL = 1e-10
_LOG2 = math.log(2.0)


def scaled_mu(n, c=1.0):
    """The ``c * n**(-5/4)`` smoothing scale; ``c`` is a free knob."""
    return c * float(n) ** -1.25


def _check_mu(mu):
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    return float(mu)


def h_mu(z, mu):
    """``mu * log(cosh(z / mu))`` without overflow, for scalars or arrays."""
    mu = _check_mu(mu)
    a = np.abs(z)
    out = a + mu * (np.log1p(np.exp(-2.0 * a / mu)) - _LOG2)
    return float(out) if np.ndim(out) == 0 else out


def h_mu_d1(z, mu):
    """First derivative ``tanh(z / mu)``."""
    mu = _check_mu(mu)
    out = np.tanh(np.asarray(z, dtype=float) / mu)
    return float(out) if np.ndim(out) == 0 else out


def h_mu_d2(z, mu):
    """Second derivative ``(1 - tanh^2(z / mu)) / mu`` via ``4e/(1+e)^2``."""
    mu = _check_mu(mu)
    e = np.exp(-2.0 * np.abs(np.asarray(z, dtype=float)) / mu)
    out = 4.0 * e / ((1.0 + e) ** 2) / mu
    return float(out) if np.ndim(out) == 0 else out


def _check_data(q, yhat):
    q = np.asarray(q, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if yhat.ndim != 2 or q.ndim != 1 or q.shape[0] != yhat.shape[0]:
        raise ParameterError(f"dimension mismatch: q {q.shape}, data {yhat.shape}")
    return q, yhat


def derivs(q, yhat, mu, order=2):
    """``(value, grad, hess)`` of the ambient objective in one pass."""
    mu = _check_mu(mu)
    q, yhat = _check_data(q, yhat)
    return _kernels.sphere_derivs(q, yhat, mu, order)


def objective(q, yhat, mu):
    return derivs(q, yhat, mu, order=0)[0]


def euclidean_grad(q, yhat, mu):
    return derivs(q, yhat, mu, order=1)[1]


def euclidean_hess(q, yhat, mu):
    """Dense ambient Hessian ``(1/(p mu)) sum_k sech^2(q.y_k/mu) y_k y_k^T``."""
    return derivs(q, yhat, mu, order=2)[2]


def euclidean_hess_vec(q, yhat, mu, v):
    """Matrix-free ambient Hessian-vector product."""
    mu = _check_mu(mu)
    q, yhat = _check_data(q, yhat)
    v = np.asarray(v, dtype=float)
    if v.shape != q.shape:
        raise ParameterError(f"direction has shape {v.shape}, expected {q.shape}")
    p = yhat.shape[1]
    z = q @ yhat
    w = h_mu_d2(z, mu)
    return yhat @ (w * (v @ yhat)) / p


def objective_decrease(q, d, yhat, mu):
    """``f(q) - f(q + d)`` computed without subtracting two rounded sums.

    Per column, with ``a = |z|`` and ``a' = |z + dz|`` of equal sign,
    ``h(z + dz) - h(z) = (a' - a) + mu * log1p(e * expm1(-2 (a' - a) / mu) / (1 + e))``
    where ``e = exp(-2a/mu)`` and ``a' - a = sign(z) dz`` comes straight from
    ``dz = d . y``. Columns whose sign flips are differenced directly; their
    ``|z|`` is at most ``|dz|`` so the cancellation there is harmless.
    """
    mu = _check_mu(mu)
    q, yhat = _check_data(q, yhat)
    z = q @ yhat
    dz = np.asarray(d, dtype=float) @ yhat
    zn = z + dz
    same = np.sign(z) == np.sign(zn)
    s = np.sign(z[same])
    da = s * dz[same]
    e = np.exp(-2.0 * np.abs(z[same]) / mu)
    dh_same = da + mu * np.log1p(e * np.expm1(-2.0 * da / mu) / (1.0 + e))
    dh_flip = h_mu(zn[~same], mu) - h_mu(z[~same], mu)
    p = yhat.shape[1]
    return float(-(np.sum(dh_same) + np.sum(dh_flip)) / p)


def project_tangent(q, v):
    return v - q * (q @ v)


def _check_tangent(q, v):
    v = np.asarray(v, dtype=float)
    scale = max(1.0, float(np.linalg.norm(v)))
    if abs(q @ v) > TANGENT_TOL * scale:
        raise ContractViolation(f"direction is not tangent at q (q.v = {q @ v:.3e})")
    return v


def riemannian_grad(q, yhat, mu):
    """Tangent-space gradient ``(I - q q^T) grad f``."""
    q, yhat = _check_data(q, yhat)
    return project_tangent(q, euclidean_grad(q, yhat, mu))


def riemannian_hess_vec(q, yhat, mu, v):
    """``(I - q q^T) Hess f v - (q . grad f) v`` for tangent ``v``."""
    q, yhat = _check_data(q, yhat)
    v = _check_tangent(q, v)
    g = euclidean_grad(q, yhat, mu)
    hv = euclidean_hess_vec(q, yhat, mu, v)
    return project_tangent(q, hv) - (q @ g) * v


# --- chart q(w) = (w, sqrt(1 - |w|^2)) ---------------------------------------


def chart_radius(n):
    """Radius of Gamma: ``sqrt((4n - 1) / (4n))``."""
    return math.sqrt((4.0 * n - 1.0) / (4.0 * n))


def reparam_q(w):
    w = np.asarray(w, dtype=float)
    nw2 = float(w @ w)
    if not nw2 < 1.0:
        raise OutOfChartError(f"|w| = {math.sqrt(nw2):.6g} is not inside the unit ball")
    return np.append(w, math.sqrt(1.0 - nw2))


def reparam_w(q):
    """Inverse chart; requires ``q_n > 1/(2 sqrt(n))``."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if not q[-1] > 1.0 / (2.0 * math.sqrt(n)):
        raise OutOfChartError(f"q_n = {q[-1]:.6g} is outside the chart (needs > {1 / (2 * math.sqrt(n)):.6g})")
    return q[:-1].copy()


def _chart_point(w, x):
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or w.ndim != 1 or x.shape[0] != w.shape[0] + 1:
        raise ParameterError(f"dimension mismatch: w {w.shape}, data {x.shape}")
    n = x.shape[0]
    nw = float(np.linalg.norm(w))
    if not nw < chart_radius(n):
        raise OutOfChartError(f"|w| = {nw:.6g} is outside Gamma (radius {chart_radius(n):.6g})")
    return w, x, reparam_q(w)


def g_derivs(w, x, mu, order=2):
    """Value, gradient and Hessian of ``g(w) = f(q(w); x)``.

    By the chain rule with ``J = dq/dw = [I; -w^T / q_n]``:

        grad g = J^T grad f
        hess g = J^T (hess f) J - (grad f)_n (I / q_n + w w^T / q_n^3)

    which, expanded per column, is the familiar
    ``tanh(.) (xbar - x_n w / q_n)`` gradient and its Hessian.
    """
    mu = _check_mu(mu)
    w, x, q = _chart_point(w, x)
    qn = q[-1]
    value, grad, hess = _kernels.sphere_derivs(q, x, mu, order)
    if order < 1:
        return value, None, None
    gg = grad[:-1] - (grad[-1] / qn) * w
    if order < 2:
        return value, gg, None
    # J^T H J with J = [I; -w^T/qn]
    hb = hess[:-1, :-1]
    hc = hess[:-1, -1]
    hnn = hess[-1, -1]
    jhj = hb - np.outer(hc, w) / qn - np.outer(w, hc) / qn + hnn * np.outer(w, w) / qn**2
    k = w.shape[0]
    curv = np.eye(k) / qn + np.outer(w, w) / qn**3
    gh = jhj - grad[-1] * curv
    gh = 0.5 * (gh + gh.T)
    return value, gg, gh


def g_value(w, x, mu):
    return g_derivs(w, x, mu, order=0)[0]


def g_grad(w, x, mu):
    return g_derivs(w, x, mu, order=1)[1]


def g_hess(w, x, mu):
    return g_derivs(w, x, mu, order=2)[2]


def g_hess_vec(w, x, mu, v):
    """Matrix-free chart Hessian-vector product for large ``n``."""
    mu = _check_mu(mu)
    w, x, q = _chart_point(w, x)
    v = np.asarray(v, dtype=float)
    qn = q[-1]
    g = euclidean_grad(q, x, mu)
    jv = np.append(v, -(w @ v) / qn)
    hjv = euclidean_hess_vec(q, x, mu, jv)
    jt = hjv[:-1] - (hjv[-1] / qn) * w
    return jt - g[-1] * (v / qn + w * (w @ v) / qn**3)
