"""Riemannian trust-region minimization on the sphere and dictionary recovery.

Each iteration works in an explicit orthonormal basis of the tangent space at
the current iterate (a Householder completion of ``q``), where the model
Hessian is a dense ``(n-1) x (n-1)`` matrix. The trust-region subproblem is
solved exactly through its eigendecomposition, so one iteration costs
``O(n^2 p + n^3)``: fine for ``n`` up to a few hundred.
"""

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq

from dlsphere import surrogate
from dlsphere.errors import (
    ContractViolation,
    DegenerateInputError,
    NumericalFailure,
    ParameterError,
    PartialResultError,
    RecoveryFailure,
)
from dlsphere.model import make_rng
from dlsphere.precond import precondition

STEP_NEWTON = "newton-like"
STEP_BOUNDARY = "boundary"
STEP_REJECTED = "rejected"

_EPS = np.finfo(float).eps


def retract(q, delta):
    """Metric-projection retraction ``(q + delta) / |q + delta|``."""
    x = np.asarray(q, dtype=float) + np.asarray(delta, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise DegenerateInputError("retraction of a step that cancels q")
    return x / nx


def _retract_offset(q, delta):
    """``retract(q, delta) - q`` for tangent ``delta``, free of cancellation.

    With ``nu = sqrt(1 + |delta|^2)`` the offset is
    ``(delta - (nu - 1) q) / nu`` and ``nu - 1 = |delta|^2 / (nu + 1)``.
    """
    d2 = float(delta @ delta)
    nu = math.sqrt(1.0 + d2)
    return (delta - (d2 / (nu + 1.0)) * q) / nu


def tangent_basis(q):
    """Orthonormal basis (columns) of the tangent space at unit ``q``.

    Columns 2..n of the Householder reflector sending ``q`` to ``-/+ e_1``;
    deterministic in ``q``.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    v = q.copy()
    v[0] += 1.0 if q[0] >= 0 else -1.0
    refl = np.eye(n) - (2.0 / (v @ v)) * np.outer(v, v)
    return refl[:, 1:]


def _model_value(g, h, s):
    return float(g @ s + 0.5 * s @ h @ s)


def tr_subproblem(g, h, delta):
    """Exact solution of ``min g.s + s.h.s/2  s.t. |s| <= delta``.

    Uses the eigendecomposition of ``h``: the interior Newton step when ``h``
    is positive definite and that step fits, otherwise the boundary solution
    ``s = -(h + lam I)^{-1} g`` with ``lam >= max(0, -lambda_min)`` found from
    the secular equation ``1/|s(lam)| = 1/delta``. In the hard case (``g``
    orthogonal to the bottom eigenspace and the shifted step too short) an
    eigenvector component is added to reach the boundary.

    Returns ``(step, predicted_decrease)`` with ``predicted_decrease >= 0``.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if not delta > 0:
        raise ParameterError(f"trust radius must be positive, got {delta}")
    k = g.shape[0]
    if h.shape != (k, k):
        raise ParameterError(f"Hessian shape {h.shape} does not match gradient ({k},)")
    if k == 0:
        return np.zeros(0), 0.0
    hscale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.T)) > 1e-8 * hscale:
        raise ContractViolation("model Hessian is not symmetric")
    h = 0.5 * (h + h.T)
    evals, evecs = np.linalg.eigh(h)
    gh = evecs.T @ g
    lam_min = evals[0]

    if lam_min > 0:
        x = -gh / evals
        if np.linalg.norm(x) <= delta:
            s = evecs @ x
            return s, max(0.0, -_model_value(g, h, s))

    scale = max(float(np.max(np.abs(evals))), float(np.linalg.norm(g)), 1e-300)
    lo = max(0.0, -lam_min)
    deg = evals - lam_min <= 1e-10 * scale
    g_deg = float(np.linalg.norm(gh[deg]))
    if lam_min <= 0 and g_deg <= 1e-12 * scale:
        x_rest = np.zeros(k)
        x_rest[~deg] = -gh[~deg] / (evals[~deg] + lo)
        nrest = float(np.linalg.norm(x_rest))
        if nrest <= delta:
            # hard case
            z = evecs[:, np.flatnonzero(deg)[0]].copy()
            if z[np.argmax(np.abs(z))] < 0:
                z = -z
            tau = math.sqrt(max(delta * delta - nrest * nrest, 0.0))
            s = evecs @ x_rest + tau * z
            return s, max(0.0, -_model_value(g, h, s))

    def secular(lam):
        d = evals + lam
        with np.errstate(divide="ignore", invalid="ignore"):
            comp = np.where(d > 0, gh / np.where(d > 0, d, 1.0), np.where(gh == 0, 0.0, np.inf))
        nx = np.linalg.norm(comp)
        return (0.0 if np.isinf(nx) else 1.0 / nx) - 1.0 / delta

    a = lo
    b = lo + float(np.linalg.norm(g)) / delta + 1e-300
    if secular(b) < 0:  # pragma: no cover - guarded by the bound on |s(b)|
        b *= 2.0
    if secular(a) >= 0:
        lam = a
    else:
        lam = brentq(secular, a, b, xtol=1e-15 * max(1.0, b), rtol=4 * _EPS, maxiter=500)
    d = evals + lam
    x = -gh / d
    nx = float(np.linalg.norm(x))
    if nx > 0:
        x *= delta / nx
    s = evecs @ x
    return s, max(0.0, -_model_value(g, h, s))


@dataclass
class TrmOptions:
    delta0: float = 0.1
    delta_max: float = 1.0
    eta_accept: float = 0.1
    grad_tol: float = 1e-8
    neg_curv_tol: float = 1e-6
    max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta0 <= self.delta_max:
            raise ParameterError("need 0 < delta0 <= delta_max")
        if not 0 < self.eta_accept < 0.25:
            raise ParameterError("eta_accept must lie in (0, 1/4)")
        if not (self.grad_tol > 0 and self.neg_curv_tol > 0):
            raise ParameterError("tolerances must be positive")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be >= 0")

    def to_dict(self):
        return asdict(self)


@dataclass
class TraceEntry:
    f: float
    grad_norm: float
    delta: float
    step_kind: str

    def to_dict(self):
        return {"f": self.f, "grad_norm": self.grad_norm, "delta": self.delta, "step_kind": self.step_kind}


@dataclass
class SolverResult:
    q_star: np.ndarray
    f_star: float
    grad_norm: float
    hess_min_eig: float
    iters: int
    converged: bool
    trace: list = field(default_factory=list)
    q0: np.ndarray = None

    @property
    def is_local_min(self):
        return self.converged

    def to_dict(self, include_trace=False):
        out = {
            "q_star": [float(v) for v in self.q_star],
            "f_star": float(self.f_star),
            "grad_norm": float(self.grad_norm),
            "hess_min_eig": float(self.hess_min_eig),
            "iters": int(self.iters),
            "converged": bool(self.converged),
        }
        if include_trace:
            out["trace"] = [t.to_dict() for t in self.trace]
        return out


def _riemannian_model(q, egrad, ehess):
    basis = tangent_basis(q)
    rg = basis.T @ egrad
    rh = basis.T @ ehess @ basis - float(q @ egrad) * np.eye(basis.shape[1])
    rh = 0.5 * (rh + rh.T)
    hmin = float(np.linalg.eigvalsh(rh)[0]) if rh.size else 0.0
    return basis, rg, rh, float(np.linalg.norm(rg)), hmin


def trm_solve(yhat, mu, q0, opts=None):
    """Minimize ``f(q; yhat)`` over the unit sphere from ``q0``.

    A step is accepted when the ratio of actual to predicted decrease
    exceeds ``eta_accept``; the actual decrease is evaluated column by column
    (see :func:`surrogate.objective_decrease`) so the ratio stays meaningful
    when both decreases are far below the rounding level of ``f``.
    The radius shrinks by 4 when the ratio is below 1/4 and doubles, up to
    ``delta_max``, when it exceeds 3/4 on a boundary step. Iteration stops at
    a second-order stationary point (gradient norm ``<= grad_tol`` and
    smallest Riemannian Hessian eigenvalue ``>= -neg_curv_tol``) or after
    ``max_iters`` iterations.
    """
    opts = opts or TrmOptions()
    yhat = np.asarray(yhat, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    if q0.ndim != 1 or q0.shape[0] != yhat.shape[0]:
        raise ParameterError(f"q0 has shape {q0.shape}, data has {yhat.shape[0]} rows")
    nq = np.linalg.norm(q0)
    if abs(nq - 1.0) > 1e-8:
        raise ParameterError(f"q0 must have unit norm, got {nq}")
    q = q0 / nq
    f, eg, eh = surrogate.derivs(q, yhat, mu)
    trace = []
    if not np.isfinite(f):
        raise NumericalFailure("non-finite objective at the initial point", trace)
    basis, rg, rh, gnorm, hmin = _riemannian_model(q, eg, eh)
    delta = opts.delta0
    iters = 0

    def stationary():
        return gnorm <= opts.grad_tol and hmin >= -opts.neg_curv_tol

    while iters < opts.max_iters and not stationary():
        s, pred = tr_subproblem(rg, rh, delta)
        if not pred > 0.0:
            break
        step = basis @ s
        boundary = np.linalg.norm(s) >= (1.0 - 1e-6) * delta
        q_new = retract(q, step)
        f_new, eg_new, eh_new = surrogate.derivs(q_new, yhat, mu)
        if not np.isfinite(f_new) or not np.all(np.isfinite(eg_new)):
            raise NumericalFailure("non-finite objective during trust-region iteration", trace)
        actual = surrogate.objective_decrease(q, _retract_offset(q, step), yhat, mu)
        rho = actual / pred
        accepted = rho > opts.eta_accept
        if rho < 0.25:
            delta *= 0.25
        elif rho > 0.75 and boundary:
            delta = min(2.0 * delta, opts.delta_max)
        if accepted:
            # track f through the accurate decreases so the trace is monotone
            q, f, eg, eh = q_new, f - actual, eg_new, eh_new
            basis, rg, rh, gnorm, hmin = _riemannian_model(q, eg, eh)
            kind = STEP_BOUNDARY if boundary else STEP_NEWTON
        else:
            kind = STEP_REJECTED
        trace.append(TraceEntry(float(f), gnorm, float(delta), kind))
        iters += 1
        if delta < 1e-14:
            break
    return SolverResult(
        q_star=q,
        f_star=float(f),
        grad_norm=gnorm,
        hess_min_eig=hmin,
        iters=iters,
        converged=stationary(),
        trace=trace,
        q0=q0 / nq,
    )


def signed_distance(q, r):
    """``min(|q - r|, |q + r|)``: distance modulo the sign symmetry."""
    return float(min(np.linalg.norm(q - r), np.linalg.norm(q + r)))


class DirectionSet:
    """Unit vectors collected modulo sign; first representative wins."""

    def __init__(self, tol=0.1):
        if not 0 < tol < math.sqrt(2):
            raise ParameterError("dedup tolerance must lie in (0, sqrt(2))")
        self.tol = tol
        self.representatives = []

    def __len__(self):
        return len(self.representatives)

    def add(self, q):
        q = np.asarray(q, dtype=float)
        for r in self.representatives:
            if signed_distance(q, r) <= self.tol:
                return False
        self.representatives.append(q)
        return True


def dedup_signed(points, tol=0.1):
    """Greedy clustering of unit vectors modulo sign."""
    ds = DirectionSet(tol)
    for q in points:
        ds.add(q)
    return ds.representatives


def random_unit(n, seed, *substream):
    v = make_rng(seed, *substream).standard_normal(n)
    return v / np.linalg.norm(v)


@dataclass
class Multistart:
    results: list
    restarts_used: int
    runs: list


def run_multistart(yhat, mu, opts=None, max_restarts=50, target_count=1, dedup_tol=0.1):
    """Restart ``trm_solve`` from random points until enough distinct minimizers.

    Restart ``r`` starts from a uniform point drawn from stream
    ``(opts.seed, r)``, so the run is reproducible and independent of how
    many restarts end up being needed. Only converged runs count.
    """
    opts = opts or TrmOptions()
    yhat = np.asarray(yhat, dtype=float)
    n = yhat.shape[0]
    if not 1 <= target_count <= n:
        raise ParameterError(f"target_count must lie in [1, {n}]")
    found = DirectionSet(dedup_tol)
    results, runs = [], []
    used = 0
    for r in range(max_restarts):
        if len(found) >= target_count:
            break
        res = trm_solve(yhat, mu, random_unit(n, opts.seed, r), opts)
        used += 1
        runs.append(res)
        if res.converged and found.add(res.q_star):
            results.append(res)
    ms = Multistart(results=results, restarts_used=used, runs=runs)
    if len(results) < target_count:
        raise PartialResultError(
            f"found {len(results)} of {target_count} distinct directions in {used} restarts",
            results=results,
            report=ms,
        )
    return ms


def multistart(yhat, mu, opts=None, max_restarts=50, target_count=1, dedup_tol=0.1):
    return run_multistart(yhat, mu, opts, max_restarts, target_count, dedup_tol).results


@dataclass
class RecoveryReport:
    a_hat: np.ndarray
    x_hat: np.ndarray
    restarts_used: int
    distinct_directions_found: int
    residual: float
    directions: np.ndarray
    clamp_count: int = 0
    solver_results: list = field(default_factory=list)

    def to_dict(self, include_x_hat=False, include_traces=False):
        out = {
            "a_hat": self.a_hat.tolist(),
            "directions": self.directions.tolist(),
            "restarts_used": int(self.restarts_used),
            "distinct_directions_found": int(self.distinct_directions_found),
            "residual": float(self.residual),
            "clamp_count": int(self.clamp_count),
            "solver_results": [r.to_dict(include_trace=include_traces) for r in self.solver_results],
        }
        if include_x_hat:
            out["x_hat"] = self.x_hat.tolist()
        return out


def recover_dictionary(y, theta, mu=surrogate.DEFAULT_MU, opts=None, max_restarts=None, dedup_tol=0.1, force=False):
    """Precondition, collect ``n`` sign-distinct minimizers, then solve for ``A``.

    ``X_hat = Q^T ybar`` with the minimizers as columns of ``Q``;
    ``A_hat`` is the least-squares solution of ``Y = A X_hat``.
    """
    y = np.asarray(y, dtype=float)
    n, p = y.shape
    if not force and not 0 < theta < 0.5:
        raise ParameterError(f"theta={theta} is outside (0, 1/2); pass force=True to override")
    if p < n:
        raise ParameterError("need p >= n")
    opts = opts or TrmOptions()
    max_restarts = 10 * n if max_restarts is None else max_restarts
    pre = precondition(y, theta)
    ms = run_multistart(pre.ybar, mu, opts, max_restarts, n, dedup_tol)
    q = np.column_stack([r.q_star for r in ms.results])
    x_hat = q.T @ pre.ybar
    sv = np.linalg.svd(x_hat, compute_uv=False)
    if not sv[-1] > max(n, p) * _EPS * sv[0]:
        raise RecoveryFailure("recovered coefficient matrix is rank deficient")
    a_t, *_ = np.linalg.lstsq(x_hat.T, y.T, rcond=None)
    a_hat = a_t.T
    residual = float(np.linalg.norm(y - a_hat @ x_hat) / np.linalg.norm(y))
    return RecoveryReport(
        a_hat=a_hat,
        x_hat=x_hat,
        restarts_used=ms.restarts_used,
        distinct_directions_found=len(ms.results),
        residual=residual,
        directions=q,
        clamp_count=pre.clamp_count,
        solver_results=ms.results,
    )
