import csv
import math

import numpy as np
import pytest
from scipy import stats

from dlsphere import geometry as geo
from dlsphere import surrogate as sg
from dlsphere.errors import OutOfChartError, ParameterError, UnsupportedDimension
from dlsphere.model import CoefficientModel, make_rng, sample_bg


def test_region_spec_radii():
    spec = geo.RegionSpec(0.05, 5)
    assert spec.r1_outer == 0.05 / (4 * math.sqrt(2))
    assert spec.r2_outer == 1 / (20 * math.sqrt(5))
    assert spec.r3_outer == math.sqrt(19 / 20)
    assert 0 < spec.r1_outer < spec.r2_outer < spec.r3_outer < 1
    with pytest.raises(ParameterError):
        geo.RegionSpec(0.15, 3)


def test_classify_boundaries():
    spec = geo.RegionSpec(0.05, 5)
    e = np.eye(4)[0]
    assert geo.classify_region(np.zeros(4), spec) == "R1"
    assert geo.classify_region(spec.r1_outer * e, spec) == "R1"
    assert geo.classify_region(spec.r2_outer * e, spec) == "R2"
    assert geo.classify_region(0.999 * spec.r3_outer * e, spec) == "R3"
    assert geo.classify_region(spec.r3_outer * e, spec) == geo.OUTSIDE


def test_sample_region_classifies_back_and_is_uniform():
    spec = geo.RegionSpec(0.05, 5)
    assert geo.sample_region("R2", 0, spec, 0).shape == (0, 4)
    for region in geo.REGIONS:
        pts = geo.sample_region(region, 10_000, spec, 1)
        assert all(geo.classify_region(w, spec) == region for w in pts)
        lo, hi = spec.band(region)
        r = np.linalg.norm(pts, axis=1)
        assert stats.kstest(r, "uniform", args=(lo, hi - lo)).statistic <= 0.02
    a = geo.sample_region("R3", 5, spec, 3)
    assert np.array_equal(a, geo.sample_region("R3", 5, spec, 3))


def test_probe_basics():
    rng = make_rng(0)
    x = rng.standard_normal((4, 200))
    spec = geo.RegionSpec(0.1, 4)
    w = np.array([0.1, -0.2, 0.05])
    pr = geo.probe(w, x, 0.1, spec)
    u = w / np.linalg.norm(w)
    assert math.isclose(pr.grad_radial, u @ sg.g_grad(w, x, 0.1), rel_tol=1e-12)
    assert math.isclose(pr.curv_radial, u @ sg.g_hess(w, x, 0.1) @ u, rel_tol=1e-12)
    assert pr.hess_min_eig <= pr.curv_radial + 1e-12
    assert pr.region == "R3"
    with pytest.raises(OutOfChartError):
        geo.probe(np.array([0.0, 0.0, 0.99]), x, 0.1, spec)


def test_probe_at_origin_reports_gradient_norm():
    rng = make_rng(1)
    x = rng.standard_normal((3, 100))
    x[-1] = 0.0
    spec = geo.RegionSpec(0.1, 3)
    pr = geo.probe(np.zeros(2), x, 0.1, spec)
    assert pr.at_origin
    assert pr.grad_radial == pytest.approx(np.linalg.norm(sg.g_grad(np.zeros(2), x, 0.1)))
    assert pr.curv_radial == pr.hess_min_eig


def test_probe_sign_symmetry_and_permutation():
    rng = make_rng(2)
    x = sample_bg(4, 500, 0.4, 3)
    mu = 0.1
    spec = geo.RegionSpec(mu, 4)
    w = np.array([0.15, -0.3, 0.2])
    a, b = geo.probe(w, x, mu, spec), geo.probe(w, -x, mu, spec)
    assert math.isclose(a.grad_radial, b.grad_radial, rel_tol=1e-12)
    assert math.isclose(a.curv_radial, b.curv_radial, rel_tol=1e-12)
    perm, signs = np.array([2, 0, 1]), np.array([1.0, -1.0, -1.0])
    xp = x.copy()
    xp[:3] = signs[:, None] * x[perm]
    wp = np.empty(3)
    wp[:] = signs * w[perm]
    c = geo.probe(wp, xp, mu, spec)
    assert math.isclose(a.grad_radial, c.grad_radial, rel_tol=1e-10)


def test_verify_landscape_tallies_and_determinism():
    x = sample_bg(5, 100_000, 0.3, 1)
    rep = geo.verify_landscape(x, 0.05, 0.3, 200, 2)
    for r in geo.REGIONS:
        assert rep.samples[r] == 200
        assert 0 <= rep.passes[r] <= rep.samples[r]
    assert rep.pass_fraction("R1") >= 0.99
    assert rep.pass_fraction("R2") >= 0.99
    assert rep.w_star_norm <= 0.05 / 16
    assert rep.newton_grad_norm <= 1e-10
    again = geo.verify_landscape(x, 0.05, 0.3, 200, 2)
    assert again.to_dict() == rep.to_dict()


def test_r3_curvature_small_mu():
    x = sample_bg(3, 100_000, 0.5, 1)
    mu = 1e-3
    spec = geo.RegionSpec(mu, 3)
    pts = geo.sample_region("R3", 300, spec, 2)
    ok = sum(geo.probe(w, x, mu, spec).passes() for w in pts)
    assert ok / len(pts) >= 0.99


def test_newton_minimizer_converges():
    x = sample_bg(4, 20_000, 0.3, 5)
    nr = geo.newton_minimizer(x, 0.05)
    assert nr.converged and nr.iters < 100
    assert np.linalg.norm(sg.g_grad(nr.w, x, 0.05)) <= 1e-10


def test_expectation_theta_zero_and_origin():
    est = geo.expectation_mc(np.array([0.1, 0.2]), 0.0, 0.05, 1000, 0)
    assert est.grad_radial_mean == 0 and est.curv_radial_mean == 0
    assert est.hess_min_eig_of_mean == 0 and est.grad_radial_se == 0
    est0 = geo.expectation_mc(np.zeros(2), 0.4, 0.05, 1000, 0)
    assert est0.grad_radial_mean is None and est0.curv_radial_mean is None
    assert est0.hess_min_eig_of_mean > 0


def test_expectation_matches_probe_on_same_samples():
    from dlsphere.model import child_seed, sample_coefficients

    w = np.array([0.3, -0.1])
    mu, theta, n_mc = 0.05, 0.3, 5000
    est = geo.expectation_mc(w, theta, mu, n_mc, 7)
    x = sample_coefficients(3, n_mc, CoefficientModel.bg(theta), child_seed(7, 0))
    pr = geo.probe(w, x, mu, geo.RegionSpec(mu, 3))
    assert math.isclose(est.grad_radial_mean, pr.grad_radial, rel_tol=1e-10)
    assert math.isclose(est.curv_radial_mean, pr.curv_radial, rel_tol=1e-9)
    assert math.isclose(est.hess_min_eig_of_mean, pr.hess_min_eig, rel_tol=1e-9)
    assert est.grad_radial_se > 0


def test_expectation_chunking_is_deterministic():
    w = np.array([0.2, 0.1])
    a = geo.expectation_mc(w, 0.3, 0.05, 300_000, 1)
    b = geo.expectation_mc(w, 0.3, 0.05, 300_000, 1)
    assert a.to_dict() == b.to_dict()


def test_export_surface(tmp_path):
    x = sample_bg(3, 2000, 0.3, 0)
    cfg = geo.SurfaceConfig(resolution=21, mu=0.1, source="matrix", x=x)
    path = tmp_path / "s.csv"
    rows = geo.export_surface(cfg, path)
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["w1", "w2", "g"]
    assert len(data) - 1 == len(rows)
    origin = [r for r in data[1:] if float(r[0]) == 0.0 and float(r[1]) == 0.0]
    assert len(origin) == 1 and float(origin[0][2]) == sg.g_value(np.zeros(2), x, 0.1)
    for r in data[1::37]:
        w = np.array([float(r[0]), float(r[1])])
        assert float(r[2]) == sg.g_value(w, x, 0.1)
    assert np.all(np.hypot(rows[:, 0], rows[:, 1]) < sg.chart_radius(3))


def test_export_surface_errors():
    with pytest.raises(UnsupportedDimension):
        geo.export_surface(geo.SurfaceConfig(n=4))
    with pytest.raises(ParameterError):
        geo.export_surface(geo.SurfaceConfig(resolution=20, num_mc=10))


def test_surface_uniform_model_valleys_along_axes():
    # the minimizers +-e1, +-e2 lie on |w| = 1, just outside the chart disk,
    # so on the outer ring the lowest node of each axis sector sits on the axis
    cfg = geo.SurfaceConfig(resolution=41, mu=0.05, model=CoefficientModel.independent_uniform(0.1), num_mc=100_000, seed=0)
    rows = geo.export_surface(cfg)
    _, lin = geo.surface_grid(cfg)
    cell = lin[1] - lin[0]
    ring = rows[np.hypot(rows[:, 0], rows[:, 1]) > 0.8]
    angle = np.arctan2(ring[:, 1], ring[:, 0])
    for axis in (0.0, np.pi / 2, np.pi, -np.pi / 2):
        off = np.angle(np.exp(1j * (angle - axis)))
        sector = ring[np.abs(off) < np.pi / 4]
        w1, w2 = sector[np.argmin(sector[:, 2]), :2]
        assert min(abs(w1), abs(w2)) <= 2 * cell
