import os
import subprocess
import sys

import numpy as np
import pytest

from dlsphere import _backend, _kernels
from dlsphere.model import make_rng

needs_numba = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("mu", [1.0, 0.05, 1e-4])
def test_sphere_derivs_backends_agree(mu):
    rng = make_rng(0)
    y = rng.standard_normal((7, 3001))
    q = rng.standard_normal(7)
    q /= np.linalg.norm(q)
    for order in (0, 1, 2):
        a = _kernels.sphere_derivs_numpy(q, y, mu, order)
        b = _kernels.sphere_derivs_numba(q, y, mu, order)
        assert np.isclose(a[0], b[0], rtol=1e-12)
        for u, v in zip(a[1:], b[1:]):
            if u is None:
                assert v is None
            else:
                assert np.allclose(u, v, rtol=1e-10, atol=1e-12 / mu)


@needs_numba
def test_soft_threshold_backends_agree():
    m = make_rng(1).standard_normal((9, 13))
    for lam in (0.0, 0.5, 10.0):
        assert np.array_equal(_kernels.soft_threshold_numpy(m, lam), _kernels.soft_threshold_numba(m, lam))


def test_flag_parsing():
    assert not _backend._flag_set(None)
    for v in ("", "0", "false", "no", "FALSE"):
        assert not _backend._flag_set(v)
    for v in ("1", "yes", "true"):
        assert _backend._flag_set(v)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, **{_backend.ENV_FLAG: "1"})
    out = subprocess.run(
        [sys.executable, "-c", "from dlsphere import _backend, _kernels; print(_backend.backend_name(), _kernels.sphere_derivs is _kernels.sphere_derivs_numpy)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.split() == ["numpy", "True"]


def test_default_backend_binding():
    expected = _kernels.sphere_derivs_numba if _backend.USE_NUMBA else _kernels.sphere_derivs_numpy
    assert _kernels.sphere_derivs is expected
