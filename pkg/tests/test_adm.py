import itertools
import math

import numpy as np
import pytest

from dlsphere import adm
from dlsphere.errors import DegenerateInputError, ParameterError
from dlsphere.metrics import recovery_error
from dlsphere.model import make_instance, make_rng, sample_dictionary


def test_soft_threshold_examples():
    assert adm.soft_threshold(np.array([3.0, -3.0, 1.0]), 2.0).tolist() == [1.0, -1.0, 0.0]
    m = make_rng(0).standard_normal((4, 5))
    assert np.array_equal(adm.soft_threshold(m, 0.0), m)
    with pytest.raises(ParameterError):
        adm.soft_threshold(m, -1.0)


def test_soft_threshold_is_scalar_argmin():
    # S_lam[c] minimizes lam |x| + (x - c)^2 / 2; compare with a fine grid
    grid = np.linspace(-4, 4, 80_001)
    lam = 0.7
    for c in (-2.3, -0.5, 0.0, 0.69, 1.9):
        vals = lam * np.abs(grid) + 0.5 * (grid - c) ** 2
        assert abs(adm.soft_threshold(np.array([c]), lam)[0] - grid[np.argmin(vals)]) <= 1e-4


def test_polar_examples():
    q = sample_dictionary(5, "orthogonal", 1)
    assert np.allclose(adm.polar_factor(q), q, atol=1e-10)
    assert np.allclose(adm.polar_factor(np.diag([2.0, 3.0])), np.eye(2), atol=1e-15)
    m = make_rng(2).standard_normal((6, 6))
    w, v = np.linalg.eigh(m.T @ m)
    alt = m @ (v / np.sqrt(w)) @ v.T
    assert np.linalg.norm(adm.polar_factor(m) - alt) <= 1e-8
    with pytest.raises(DegenerateInputError):
        adm.polar_factor(np.zeros((3, 3)))


def test_polar_is_procrustes_argmin_n2():
    # exhaustive search over rotations and reflections at 1e-3 angle steps
    rng = make_rng(3)
    y = rng.standard_normal((2, 30))
    x = rng.standard_normal((2, 30))
    a = adm.polar_factor(y @ x.T)
    best = np.inf
    for t in np.arange(0, 2 * np.pi, 1e-3):
        c, s = math.cos(t), math.sin(t)
        for r in (np.array([[c, -s], [s, c]]), np.array([[c, s], [s, -c]])):
            best = min(best, np.linalg.norm(r @ x - y))
    assert np.linalg.norm(a @ x - y) <= best + 1e-9
    assert best - np.linalg.norm(a @ x - y) <= 1e-2


def test_adm_identity_coefficients():
    a0 = sample_dictionary(4, "orthogonal", 4)
    res = adm.adm_learn(a0, 1e-3, seed=0)
    assert recovery_error(res.a, a0) <= 1e-6
    assert np.linalg.norm(res.a.T @ res.a - np.eye(4)) <= 1e-8


def test_adm_trace_monotone_and_orthogonal():
    inst = make_instance(8, 500, 0.3, 5)
    res = adm.adm_learn(inst.y, 0.3, seed=1, max_iters=2000)
    tr = res.objective_trace
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(tr, tr[1:]))
    assert np.linalg.norm(res.a.T @ res.a - np.eye(8)) <= 1e-8
    assert math.isclose(res.l1_score, np.abs(res.a.T @ inst.y).sum(), rel_tol=1e-12)


def test_adm_trivial_solution_warning():
    y = make_rng(6).standard_normal((3, 10))
    a_init = np.eye(3)
    res = adm.adm_learn(y, 1e3, a_init=a_init)
    assert res.warning == adm.TRIVIAL_WARNING
    assert np.array_equal(res.a, a_init)
    assert not np.any(res.x)


def test_adm_input_checks():
    y = make_rng(7).standard_normal((3, 10))
    with pytest.raises(ParameterError):
        adm.adm_learn(y, 0.0, seed=0)
    with pytest.raises(ParameterError):
        adm.adm_learn(np.zeros((3, 4)), 1.0, seed=0)
    with pytest.raises(ParameterError):
        adm.adm_learn(y, 1.0)
    with pytest.raises(ParameterError):
        adm.adm_learn(y, 1.0, a_init=2 * np.eye(3))


def test_l1_score_invariant_under_signed_permutation():
    rng = make_rng(8)
    y = rng.standard_normal((4, 20))
    a = sample_dictionary(4, "orthogonal", 9)
    base = adm.l1_score(a, y)
    for perm in itertools.permutations(range(4)):
        for signs in itertools.product((1.0, -1.0), repeat=4):
            assert math.isclose(adm.l1_score(a[:, perm] * np.array(signs), y), base, rel_tol=1e-13)


def test_dispersion_identical_seeds():
    inst = make_instance(5, 200, 0.3, 10)
    d = adm.dispersion_experiment(inst.y, 0.5, 2, max_iters=200, init_seeds=[3, 3])
    assert d.relative_spread == 0.0
    with pytest.raises(ParameterError):
        adm.dispersion_experiment(inst.y, 0.5, 1)


def test_dispersion_reproducible():
    inst = make_instance(5, 200, 0.3, 11)
    a = adm.dispersion_experiment(inst.y, 0.5, 3, max_iters=300, seed=4)
    b = adm.dispersion_experiment(inst.y, 0.5, 3, max_iters=300, seed=4)
    assert a.to_dict() == b.to_dict()
    assert len(a.l1_scores) == 3
