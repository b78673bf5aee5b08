"""Empirical checks of the three-region landscape of ``g(w) = f(q(w); X)``.

Around ``w = 0`` (i.e. ``q = e_n``) the landscape splits into radial bands:

* R1, ``|w| <= mu / (4 sqrt 2)``: the Hessian is positive definite;
* R2, up to ``1 / (20 sqrt 5)``: the radial gradient ``w.grad g / |w|`` is positive;
* R3, up to the chart radius ``sqrt((4n-1)/(4n))``: the radial curvature
  ``w.hess g.w / |w|^2`` is negative.

The size of the margins is governed by unspecified constants, so the checks
here test signs (against a configurable margin, default 0). Boundary radii
belong to the inner region.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from dlsphere import surrogate
from dlsphere.errors import OutOfChartError, ParameterError, UnsupportedDimension
from dlsphere.model import CoefficientModel, child_seed, make_rng, sample_coefficients

REGIONS = ("R1", "R2", "R3")
OUTSIDE = "outside"
R1_FLOOR = 1e-6


@dataclass(frozen=True)
class RegionSpec:
    mu: float
    n: int

    def __post_init__(self):
        if not self.mu > 0 or self.n < 2:
            raise ParameterError("RegionSpec needs mu > 0 and n >= 2")
        if not self.r1_outer < self.r2_outer:
            raise ParameterError(
                f"mu={self.mu} leaves no gradient band: mu/(4 sqrt 2) must be below 1/(20 sqrt 5)"
            )

    @property
    def r1_outer(self):
        return self.mu / (4.0 * math.sqrt(2.0))

    @property
    def r2_outer(self):
        return 1.0 / (20.0 * math.sqrt(5.0))

    @property
    def r3_outer(self):
        return surrogate.chart_radius(self.n)

    def band(self, region):
        if region == "R1":
            return R1_FLOOR, self.r1_outer
        if region == "R2":
            return self.r1_outer, self.r2_outer
        if region == "R3":
            return self.r2_outer, self.r3_outer
        raise ParameterError(f"unknown region {region!r}")


def classify_region(w, spec):
    r = float(np.linalg.norm(w))
    if r <= spec.r1_outer:
        return "R1"
    if r <= spec.r2_outer:
        return "R2"
    if r < spec.r3_outer:
        return "R3"
    return OUTSIDE


def sample_region(region, count, spec, seed):
    """``count`` points with uniform direction and radius uniform on the band.

    Draws that land on the wrong side of a band edge through rounding are
    redrawn, so every point classifies back to ``region``.
    """
    if count < 0:
        raise ParameterError("count must be >= 0")
    k = spec.n - 1
    if count == 0:
        return np.zeros((0, k))
    lo, hi = spec.band(region)
    rng = make_rng(seed, REGIONS.index(region))
    out = []
    while len(out) < count:
        m = count - len(out)
        d = rng.standard_normal((m, k))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = rng.uniform(lo, hi, size=m)
        for w in d * r[:, None]:
            if classify_region(w, spec) == region:
                out.append(w)
    return np.array(out)


@dataclass
class LandscapeProbe:
    w: np.ndarray
    grad_radial: float
    curv_radial: float
    hess_min_eig: float
    region: str
    grad_norm: float
    at_origin: bool = False

    def passes(self, margin=0.0):
        """Sign condition of the point's region; ``None`` outside Gamma."""
        if self.region == "R1":
            return self.hess_min_eig > margin
        if self.region == "R2":
            return self.grad_radial > margin
        if self.region == "R3":
            return self.curv_radial < -margin
        return None


def probe(w, x, mu, spec):
    """Radial gradient, radial curvature and smallest Hessian eigenvalue at ``w``.

    At ``w = 0`` the radial direction is undefined; the probe then reports the
    gradient norm as ``grad_radial`` and the smallest Hessian eigenvalue as
    ``curv_radial``, and sets ``at_origin``.
    """
    w = np.asarray(w, dtype=float)
    _, grad, hess = surrogate.g_derivs(w, x, mu)
    emin = float(np.linalg.eigvalsh(hess)[0])
    r = float(np.linalg.norm(w))
    gnorm = float(np.linalg.norm(grad))
    if r == 0.0:
        return LandscapeProbe(w, gnorm, emin, emin, classify_region(w, spec), gnorm, at_origin=True)
    u = w / r
    return LandscapeProbe(
        w=w,
        grad_radial=float(u @ grad),
        curv_radial=float(u @ hess @ u),
        hess_min_eig=emin,
        region=classify_region(w, spec),
        grad_norm=gnorm,
    )


@dataclass
class NewtonResult:
    w: np.ndarray
    iters: int
    grad_norm: float
    converged: bool


def newton_minimizer(x, mu, w0=None, tol=1e-10, max_iters=100):
    """Damped Newton on ``g`` with step halving, started at ``w0`` (default 0)."""
    n = x.shape[0]
    w = np.zeros(n - 1) if w0 is None else np.array(w0, dtype=float)
    val, grad, hess = surrogate.g_derivs(w, x, mu)
    it = 0
    while it < max_iters and np.linalg.norm(grad) > tol:
        try:
            c = np.linalg.cholesky(hess)
            d = -np.linalg.solve(c.T, np.linalg.solve(c, grad))
        except np.linalg.LinAlgError:
            d = -grad
        t = 1.0
        moved = False
        while t > 1e-12:
            cand = w + t * d
            try:
                v2, g2, h2 = surrogate.g_derivs(cand, x, mu)
            except OutOfChartError:
                t *= 0.5
                continue
            if v2 <= val or np.linalg.norm(g2) < np.linalg.norm(grad):
                w, val, grad, hess = cand, v2, g2, h2
                moved = True
                break
            t *= 0.5
        it += 1
        if not moved:
            break
    gn = float(np.linalg.norm(grad))
    return NewtonResult(w=w, iters=it, grad_norm=gn, converged=gn <= tol)


@dataclass
class LandscapeReport:
    n: int
    p: int
    mu: float
    theta: float
    margin: float
    threshold: float
    samples: dict
    passes: dict
    worst: dict
    w_star: np.ndarray
    newton_iters: int
    newton_grad_norm: float
    extra: dict = field(default_factory=dict)

    @property
    def w_star_norm(self):
        return float(np.linalg.norm(self.w_star))

    def pass_fraction(self, region):
        c = self.samples[region]
        return self.passes[region] / c if c else 1.0

    def region_ok(self, region):
        return self.pass_fraction(region) >= self.threshold

    @property
    def ok(self):
        return all(self.region_ok(r) for r in REGIONS)

    def to_dict(self):
        return {
            "n": self.n,
            "p": self.p,
            "mu": self.mu,
            "theta": self.theta,
            "margin": self.margin,
            "threshold": self.threshold,
            "samples": dict(self.samples),
            "passes": dict(self.passes),
            "pass_fraction": {r: self.pass_fraction(r) for r in REGIONS},
            "worst": dict(self.worst),
            "w_star": [float(v) for v in self.w_star],
            "w_star_norm": self.w_star_norm,
            "newton_iters": self.newton_iters,
            "newton_grad_norm": self.newton_grad_norm,
            "ok": self.ok,
            **self.extra,
        }


def verify_landscape(x, mu, theta, samples_per_region, seed, margin=0.0, threshold=0.99):
    """Probe every region and tally sign-condition passes.

    ``x`` is the data seen through the chart around ``e_n``: coefficients
    for an orthogonal dictionary, or ``V U^T ybar`` after preconditioning a
    complete one. ``worst`` holds the least favorable probed value per
    region (smallest eigenvalue in R1, smallest radial gradient in R2,
    largest radial curvature in R3).
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    spec = RegionSpec(mu, n)
    samples, passes, worst = {}, {}, {}
    for region in REGIONS:
        pts = sample_region(region, samples_per_region, spec, seed)
        probes = [probe(w, x, mu, spec) for w in pts]
        samples[region] = len(probes)
        passes[region] = sum(1 for pr in probes if pr.passes(margin))
        if region == "R1":
            vals = [pr.hess_min_eig for pr in probes]
            worst[region] = float(min(vals)) if vals else None
        elif region == "R2":
            vals = [pr.grad_radial for pr in probes]
            worst[region] = float(min(vals)) if vals else None
        else:
            vals = [pr.curv_radial for pr in probes]
            worst[region] = float(max(vals)) if vals else None
    nr = newton_minimizer(x, mu)
    return LandscapeReport(
        n=n,
        p=p,
        mu=float(mu),
        theta=float(theta),
        margin=float(margin),
        threshold=float(threshold),
        samples=samples,
        passes=passes,
        worst=worst,
        w_star=nr.w,
        newton_iters=nr.iters,
        newton_grad_norm=nr.grad_norm,
    )


@dataclass
class ExpectationEstimate:
    num_mc: int
    grad_radial_mean: float
    grad_radial_se: float
    curv_radial_mean: float
    curv_radial_se: float
    hess_min_eig_of_mean: float
    hess_min_eig_se: float

    def to_dict(self):
        return dict(self.__dict__)


MC_CHUNK = 200_000


def _mc_chunks(n, num_mc, model, seed):
    for c, start in enumerate(range(0, num_mc, MC_CHUNK)):
        m = min(MC_CHUNK, num_mc - start)
        yield sample_coefficients(n, m, model, child_seed(seed, c))


def _per_sample(w, x, mu):
    q = surrogate.reparam_q(w)
    qn = q[-1]
    z = q @ x
    e = np.exp(-2.0 * np.abs(z) / mu)
    t = np.sign(z) * (1.0 - e) / (1.0 + e)
    s = 4.0 * e / (1.0 + e) ** 2
    xn = x[-1]
    u = x[:-1] - np.outer(w, xn / qn)
    return qn, t, s, xn, u


def expectation_mc(w, theta, mu, num_mc, seed, model=None):
    """Monte-Carlo estimates of the expected landscape quantities at ``w``.

    Averages over ``x ~ BG(theta)`` (or ``model``) of the per-sample radial
    gradient and radial curvature of ``h_mu(q(w).x)``, with standard errors,
    plus the smallest eigenvalue of the averaged Hessian. Its standard error
    is the delta-method estimate ``sd(v.H_k.v)/sqrt(N)`` along the bottom
    eigenvector ``v`` (a second pass over the same seeded samples). Radial
    quantities are ``None`` at ``w = 0``.
    """
    if num_mc < 1:
        raise ParameterError("num_mc must be >= 1")
    w = np.asarray(w, dtype=float)
    k = w.shape[0]
    n = k + 1
    model = model or CoefficientModel.bg(theta)
    if not np.linalg.norm(w) < surrogate.chart_radius(n):
        raise OutOfChartError("w is outside Gamma")
    r = float(np.linalg.norm(w))
    u_dir = w / r if r > 0 else None
    sums = np.zeros(4)  # grad_radial, grad_radial^2, curv_radial, curv_radial^2
    h_sum = np.zeros((k, k))
    xt_sum = 0.0
    curv_shape = 1.0  # radial part of I/qn + w w^T/qn^3, set from qn below
    for x in _mc_chunks(n, num_mc, model, seed):
        qn, t, s, xn, u = _per_sample(w, x, mu)
        h_sum += (u * (s / mu)) @ u.T
        xt_sum += float(np.sum(xn * t))
        if u_dir is not None:
            curv_shape = 1.0 / qn + r * r / qn**3
            ur = u_dir @ u
            gr = t * ur
            cr = (s / mu) * ur * ur - xn * t * curv_shape
            sums += [gr.sum(), (gr * gr).sum(), cr.sum(), (cr * cr).sum()]
    qn = math.sqrt(1.0 - r * r)
    mean_h = h_sum / num_mc - (xt_sum / num_mc) * (np.eye(k) / qn + np.outer(w, w) / qn**3)
    evals, evecs = np.linalg.eigh(0.5 * (mean_h + mean_h.T))
    v = evecs[:, 0]
    vs = np.zeros(2)
    vv_curv = 1.0 / qn + (w @ v) ** 2 / qn**3
    for x in _mc_chunks(n, num_mc, model, seed):
        _, t, s, xn, u = _per_sample(w, x, mu)
        uv = v @ u
        hv = (s / mu) * uv * uv - xn * t * vv_curv
        vs += [hv.sum(), (hv * hv).sum()]

    def se(total, total_sq):
        if num_mc < 2:
            return 0.0
        var = max(total_sq - total * total / num_mc, 0.0) / (num_mc - 1)
        return math.sqrt(var / num_mc)

    if u_dir is None:
        gm = gse = cm = cse = None
    else:
        gm, cm = sums[0] / num_mc, sums[2] / num_mc
        gse, cse = se(sums[0], sums[1]), se(sums[2], sums[3])
    return ExpectationEstimate(
        num_mc=int(num_mc),
        grad_radial_mean=None if gm is None else float(gm),
        grad_radial_se=None if gse is None else float(gse),
        curv_radial_mean=None if cm is None else float(cm),
        curv_radial_se=None if cse is None else float(cse),
        hess_min_eig_of_mean=float(evals[0]),
        hess_min_eig_se=float(se(vs[0], vs[1])),
    )


@dataclass
class SurfaceConfig:
    """Grid and data source for a 2-D landscape export (``n = 3`` only).

    ``source='matrix'`` evaluates ``g`` on the supplied ``x``;
    ``source='mc'`` draws ``num_mc`` columns from ``model`` with ``seed``
    and evaluates the sample average, the same samples at every node.
    """

    n: int = 3
    resolution: int = 81
    mu: float = 0.05
    source: str = "mc"
    x: np.ndarray = None
    model: CoefficientModel = None
    num_mc: int = 100_000
    seed: int = 0


def surface_grid(cfg):
    if cfg.resolution < 3 or cfg.resolution % 2 == 0:
        raise ParameterError("resolution must be an odd integer >= 3 so that w = 0 is a node")
    r3 = surrogate.chart_radius(cfg.n)
    lin = np.linspace(-r3, r3, cfg.resolution)
    lin[cfg.resolution // 2] = 0.0
    pts = [(a, b) for a in lin for b in lin if math.hypot(a, b) < r3]
    return np.array(pts), lin


def export_surface(cfg, out_path=None):
    """Write ``w1,w2,g`` rows over the disk ``|w| < sqrt((4n-1)/(4n))``.

    Returns the ``(m, 3)`` array of rows. Values are printed with 17
    significant digits.
    """
    if cfg.n != 3:
        raise UnsupportedDimension(f"surface export is only defined for n = 3, got n = {cfg.n}")
    if cfg.source == "matrix":
        if cfg.x is None:
            raise ParameterError("source='matrix' needs x")
        x = np.asarray(cfg.x, dtype=float)
        if x.shape[0] != 3:
            raise UnsupportedDimension("x must have 3 rows")
    elif cfg.source == "mc":
        model = cfg.model or CoefficientModel.bg(0.1)
        x = sample_coefficients(3, cfg.num_mc, model, cfg.seed)
    else:
        raise ParameterError(f"unknown surface source {cfg.source!r}")
    pts, _ = surface_grid(cfg)
    vals = np.array([surrogate.g_value(w, x, cfg.mu) for w in pts])
    rows = np.column_stack([pts, vals])
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["w1", "w2", "g"])
            for a, b, v in rows:
                wr.writerow([f"{a:.17g}", f"{b:.17g}", f"{v:.17g}"])
    return rows
